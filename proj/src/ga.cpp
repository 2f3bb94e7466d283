#include "hgapso/ga.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgapso/error.hpp"

namespace hgapso {

int GaParams::elite_count() const {
  return std::max(1, static_cast<int>(std::lround(elitism_rate * population_size)));
}

void GaParams::validate() const {
  for (double p : {mutation_rate, crossover_rate, elitism_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("ga: rates must lie in [0, 1]");
  }
  if (population_size < 2) throw InvalidArgument("ga: population_size must be >= 2");
  if (generations < 1) throw InvalidArgument("ga: generations must be >= 1");
  if (tournament_size < 1) throw InvalidArgument("ga: tournament_size must be >= 1");
  if (elite_count() >= population_size) throw InvalidArgument("ga: elite count must be below population_size");
}

std::size_t tournament_select(std::span<const double> fitnesses, int tournament_size, Rng& rng) {
  if (fitnesses.empty()) throw InvalidArgument("tournament_select: empty population");
  if (tournament_size < 1) throw InvalidArgument("tournament_select: tournament_size must be >= 1");
  const auto last = static_cast<std::int64_t>(fitnesses.size()) - 1;
  auto best = static_cast<std::size_t>(rng.uniform_int(0, last));
  for (int t = 1; t < tournament_size; ++t) {
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, last));
    if (fitnesses[c] > fitnesses[best] || (fitnesses[c] == fitnesses[best] && c < best)) best = c;
  }
  return best;
}

std::pair<ConnGenome, ConnGenome> one_point_crossover_at(const ConnGenome& a, const ConnGenome& b, std::size_t cut) {
  if (a.size() != b.size()) throw InvalidArgument("crossover: parent lengths differ");
  if (a.size() <= 1) return {a, b};
  if (cut < 1 || cut >= a.size()) throw InvalidArgument("crossover: cut point out of range");
  ConnGenome x = a;
  ConnGenome y = b;
  for (std::size_t i = cut; i < a.size(); ++i) {
    x.set(i, b.bit(i));
    y.set(i, a.bit(i));
  }
  return {std::move(x), std::move(y)};
}

std::pair<ConnGenome, ConnGenome> one_point_crossover(const ConnGenome& a, const ConnGenome& b, Rng& rng) {
  if (a.size() != b.size()) throw InvalidArgument("crossover: parent lengths differ");
  if (a.size() <= 1) return {a, b};
  const auto cut = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(a.size()) - 1));
  return one_point_crossover_at(a, b, cut);
}

ConnGenome bit_flip_mutation(ConnGenome g, double mutation_rate, Rng& rng) {
  if (mutation_rate <= 0.0) return g;
  for (auto& bit : g.mutable_bits()) {
    if (rng.bernoulli(mutation_rate)) bit ^= 1;
  }
  return g;
}

std::vector<std::size_t> rank_indices(std::span<const double> fitnesses, std::size_t count) {
  std::vector<std::size_t> idx(fitnesses.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return fitnesses[l] > fitnesses[r]; });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

std::vector<ConnGenome> evolve_generation(const std::vector<ConnGenome>& population,
                                          std::span<const double> fitnesses, const GaParams& params, Rng& rng) {
  params.validate();
  if (population.size() != static_cast<std::size_t>(params.population_size))
    throw InvalidArgument("evolve_generation: population size differs from params");
  if (fitnesses.size() != population.size()) throw InvalidArgument("evolve_generation: one fitness per individual required");

  std::vector<ConnGenome> next;
  next.reserve(population.size());
  for (std::size_t i : rank_indices(fitnesses, static_cast<std::size_t>(params.elite_count()))) {
    next.push_back(population[i]);
  }
  while (next.size() < population.size()) {
    const ConnGenome& a = population[tournament_select(fitnesses, params.tournament_size, rng)];
    const ConnGenome& b = population[tournament_select(fitnesses, params.tournament_size, rng)];
    auto children = rng.bernoulli(params.crossover_rate) ? one_point_crossover(a, b, rng) : std::pair{a, b};
    next.push_back(bit_flip_mutation(std::move(children.first), params.mutation_rate, rng));
    if (next.size() < population.size())
      next.push_back(bit_flip_mutation(std::move(children.second), params.mutation_rate, rng));
  }
  return next;
}

}  // namespace hgapso
