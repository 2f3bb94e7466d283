#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hgapso/genome.hpp"
#include "hgapso/rng.hpp"

namespace hgapso {

struct GaParams {
  double mutation_rate = 0.01;
  double crossover_rate = 0.9;
  double elitism_rate = 0.1;
  int population_size = 20;
  int generations = 10;
  int tournament_size = 2;

  /// max(1, round(elitism_rate * population_size)).
  int elite_count() const;
  void validate() const;
  friend bool operator==(const GaParams&, const GaParams&) = default;
};

/// Draws `tournament_size` indices uniformly with replacement and returns the
/// fittest one; ties go to the lower index.
std::size_t tournament_select(std::span<const double> fitnesses, int tournament_size, Rng& rng);

/// Cut point uniform in [1, len - 1]; children swap suffixes. Parents of
/// length <= 1 are returned unchanged.
std::pair<ConnGenome, ConnGenome> one_point_crossover(const ConnGenome& a, const ConnGenome& b, Rng& rng);
/// Same with an explicit cut point.
std::pair<ConnGenome, ConnGenome> one_point_crossover_at(const ConnGenome& a, const ConnGenome& b, std::size_t cut);

ConnGenome bit_flip_mutation(ConnGenome g, double mutation_rate, Rng& rng);

/// Produces the next population. The first elite_count() entries are the
/// best individuals of `population`, unchanged and ordered by rank; the
/// rest are offspring of tournament-selected parents.
std::vector<ConnGenome> evolve_generation(const std::vector<ConnGenome>& population,
                                          std::span<const double> fitnesses, const GaParams& params, Rng& rng);

/// Indices of the `count` fittest individuals, best first, ties by index.
std::vector<std::size_t> rank_indices(std::span<const double> fitnesses, std::size_t count);

}  // namespace hgapso
