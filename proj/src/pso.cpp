#include "hgapso/pso.hpp"

#include <cmath>

#include "hgapso/error.hpp"

namespace hgapso {

void PsoParams::validate() const {
  for (double v : {w, c1, c2}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("pso: w, c1 and c2 must be finite and nonnegative");
  }
  if (!(r_cb >= 0.0 && r_cb <= 1.0)) throw InvalidArgument("pso: r_cb must lie in [0, 1]");
}

bool Particle::offer(const std::vector<double>& pos, const ConnGenome& conn, const FitnessRecord& record) {
  if (personal_best && !(record.fitness > personal_best->record.fitness)) return false;
  personal_best = PersonalBest{pos, conn, record};
  return true;
}

Particle make_particle(const ArchGenome& arch) {
  Particle p;
  p.position = arch.to_position();
  p.velocity.assign(p.position.size(), 0.0);
  return p;
}

std::vector<std::pair<int, int>> match_blocks(int particle_blocks, int best_blocks) {
  std::vector<std::pair<int, int>> out;
  const int n = std::min(particle_blocks, best_blocks);
  for (int i = 0; i < n; ++i) out.emplace_back(i, i);
  return out;
}

void check_position_shape(const std::vector<double>& position, const char* what) {
  if (position.size() < 3 || position.size() % 2 == 0) {
    throw InvalidArgument(std::string("pso: ") + what + " has " + std::to_string(position.size()) +
                          " dimensions, expected 1 + 2B");
  }
}

void check_particle_shape(const Particle& p) {
  if (p.position.size() != p.velocity.size()) {
    throw InvalidArgument("pso: position has " + std::to_string(p.position.size()) + " dimensions but velocity has " +
                          std::to_string(p.velocity.size()));
  }
  check_position_shape(p.position, "particle position");
}

Particle update_particle(Particle p, const std::vector<double>& gbest, const PsoParams& params, Rng& rng) {
  return update_particle(std::move(p), gbest, params, [&rng] { return rng.uniform(); });
}

Particle change_block_count(Particle p, const std::vector<double>& gbest, const PsoParams& params,
                            const SearchRanges& ranges, Rng& rng) {
  check_particle_shape(p);
  check_position_shape(gbest, "global best");
  const double rnd = rng.uniform();
  if (rnd >= params.r_cb) return p;

  const double personal = p.personal_best ? p.personal_best->position.at(0) : p.position[0];
  const double r1 = rng.uniform();
  const double r2 = rng.uniform();
  pso_step(p.position[0], p.velocity[0], personal, gbest[0], params, r1, r2);

  const int current = p.num_blocks();
  const int target = decode_block_count(p.position[0], ranges);
  if (target < current) {
    const auto dims = static_cast<std::size_t>(arch_dimension(target));
    p.position.resize(dims);
    p.velocity.resize(dims);
  } else {
    for (int b = current; b < target; ++b) {
      const BlockGene gene = random_block(ranges, rng);
      p.position.push_back(gene.num_layers);
      p.position.push_back(gene.growth_rate);
      p.velocity.push_back(0.0);
      p.velocity.push_back(0.0);
    }
  }
  return p;
}

}  // namespace hgapso
