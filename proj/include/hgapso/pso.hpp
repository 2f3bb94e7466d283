#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hgapso/fitness_record.hpp"
#include "hgapso/genome.hpp"
#include "hgapso/rng.hpp"

namespace hgapso {

struct PsoParams {
  double w = 0.7298;
  double c1 = 1.49618;
  double c2 = 1.49618;
  /// Probability per update that the block-count dimension moves.
  double r_cb = 0.3;

  void validate() const;
  friend bool operator==(const PsoParams&, const PsoParams&) = default;
};

/// Best point a particle has visited, with the connection genome that won
/// the inner evolution there.
struct PersonalBest {
  std::vector<double> position;
  ConnGenome conn;
  FitnessRecord record;
  friend bool operator==(const PersonalBest&, const PersonalBest&) = default;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::optional<PersonalBest> personal_best;

  /// Block count implied by the dimensionality (position.size() = 1 + 2B).
  int num_blocks() const { return static_cast<int>((position.size() - 1) / 2); }

  /// Replaces the personal best when `fitness` is strictly better.
  bool offer(const std::vector<double>& pos, const ConnGenome& conn, const FitnessRecord& record);

  friend bool operator==(const Particle&, const Particle&) = default;
};

/// Particle at the encoded position of `arch` with zero velocity.
Particle make_particle(const ArchGenome& arch);

/// Blocks are matched by index: block i of every particle sees the same
/// feature-map size, because each transition halves it.
std::vector<std::pair<int, int>> match_blocks(int particle_blocks, int best_blocks);

/// One dimension of the velocity and position update:
/// v' = w v + c1 r1 (p - x) + c2 r2 (g - x);  x' = x + v'.
inline void pso_step(double& x, double& v, double personal, double global, const PsoParams& params, double r1,
                     double r2) {
  v = params.w * v + params.c1 * r1 * (personal - x) + params.c2 * r2 * (global - x);
  x += v;
}

/// Applies pso_step to the dimensions of blocks present in the particle,
/// its personal best and `gbest`. Dimension 0 is left alone. `draw` returns
/// uniforms in [0, 1); r1 then r2 are drawn per updated dimension.
/// Without a personal best the particle is returned unchanged.
template <typename Draw>
Particle update_particle(Particle p, const std::vector<double>& gbest, const PsoParams& params, Draw&& draw);

Particle update_particle(Particle p, const std::vector<double>& gbest, const PsoParams& params, Rng& rng);

/// With probability r_cb moves dimension 0 and then cuts
/// blocks from the tail or appends random ones (zero velocity) to match.
Particle change_block_count(Particle p, const std::vector<double>& gbest, const PsoParams& params,
                            const SearchRanges& ranges, Rng& rng);

// ---------------------------------------------------------------------------

void check_particle_shape(const Particle& p);
void check_position_shape(const std::vector<double>& position, const char* what);

template <typename Draw>
Particle update_particle(Particle p, const std::vector<double>& gbest, const PsoParams& params, Draw&& draw) {
  check_particle_shape(p);
  check_position_shape(gbest, "global best");
  if (!p.personal_best) return p;
  const auto& pbest = p.personal_best->position;
  check_position_shape(pbest, "personal best");
  const int pb_blocks = static_cast<int>((pbest.size() - 1) / 2);
  const int gb_blocks = static_cast<int>((gbest.size() - 1) / 2);
  const auto matched = match_blocks(p.num_blocks(), std::min(pb_blocks, gb_blocks));
  for (const auto& [mine, theirs] : matched) {
    for (int k = 1; k <= 2; ++k) {
      const auto d = static_cast<std::size_t>(1 + 2 * mine + (k - 1));
      const auto e = static_cast<std::size_t>(1 + 2 * theirs + (k - 1));
      const double r1 = draw();
      const double r2 = draw();
      pso_step(p.position[d], p.velocity[d], pbest[e], gbest[e], params, r1, r2);
    }
  }
  return p;
}

}  // namespace hgapso
