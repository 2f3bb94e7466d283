#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hgapso/fitness_record.hpp"
#include "hgapso/genome.hpp"
#include "hgapso/netgraph.hpp"

namespace hgapso {

/// One fitness evaluation as sent to an evaluator. `graph` holds the
/// canonical graph text.
struct EvalRequest {
  std::string request_id;
  std::string graph;
  int epochs = 5;
  std::vector<double> lr_candidates{0.9, 0.1, 0.01};
  std::optional<double> chosen_lr;
  double data_fraction = 1.0;
  std::int64_t seed = 0;

  void validate() const;
  friend bool operator==(const EvalRequest&, const EvalRequest&) = default;
};

/// Everything besides the genomes that shapes a request.
struct EvalBudget {
  InputShape input_shape{1, 28, 28};
  int num_classes = 10;
  int epochs = 5;
  std::vector<double> lr_candidates{0.9, 0.1, 0.01};
  double data_fraction = 1.0;
  std::int64_t seed = 0;
};

EvalRequest make_request(const ArchGenome& arch, const ConnGenome& conn, const EvalBudget& budget,
                         std::string request_id, std::optional<double> chosen_lr);

/// Fitness contract shared by the surrogate and the trainer client.
/// Implementations must accept concurrent calls with distinct request ids.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvaluatorKind kind() const = 0;
  /// Same genomes and request give the same record.
  virtual bool deterministic() const = 0;
  virtual FitnessRecord evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) = 0;
};

struct SurrogateConfig {
  std::uint64_t oracle_seed = 0x5eed;
  /// Block count of the hidden target; drawn from the ranges when unset.
  std::optional<int> target_blocks;
  /// Rewarded learning rate; drawn from `lr_choices` when unset.
  std::optional<double> preferred_lr;
  std::vector<double> lr_choices{0.9, 0.1, 0.01};

  friend bool operator==(const SurrogateConfig&, const SurrogateConfig&) = default;
};

/// Deterministic synthetic landscape with a known optimum of 1.0:
///
///   fitness = 0.5 * A(arch) + 0.4 * C(arch, conn) + 0.1 * L(lr)
///
/// A = 1 - mean over max(B, B*) block slots of the per-block distance, where
///     a slot missing on either side costs 1 and a shared slot costs
///     (|L - L*| / (Lmax - Lmin) + |k - k*| / (kmax - kmin)) / 2
///     (a term with a zero-width range contributes 0).
/// C = fraction of bits in the first min(B, B*) blocks that equal the hidden
///     pattern bit for (block, source, target); 1 when there are none.
/// L = 1 when the learning rate equals the preferred rate, else 0.5.
///
/// Hidden targets come from the oracle seed only. The pattern bit of
/// (block b, source i, target j) is the low bit of
/// derive_seed(oracle_seed, {0xC0, b, i, j}).
class SurrogateEvaluator final : public Evaluator {
 public:
  SurrogateEvaluator(SurrogateConfig config, SearchRanges ranges);

  EvaluatorKind kind() const override { return EvaluatorKind::kSurrogate; }
  bool deterministic() const override { return true; }
  FitnessRecord evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) override;

  double fitness(const ArchGenome& arch, const ConnGenome& conn, double lr) const;
  double arch_score(const ArchGenome& arch) const;
  double conn_score(const ArchGenome& arch, const ConnGenome& conn) const;
  double lr_score(double lr) const { return lr == preferred_lr_ ? 1.0 : 0.5; }

  const ArchGenome& target_arch() const { return target_; }
  double preferred_lr() const { return preferred_lr_; }
  bool target_bit(std::size_t block, int source, int target) const;
  /// Hidden pattern laid out for `arch`.
  ConnGenome target_conn(const ArchGenome& arch) const;

 private:
  SurrogateConfig config_;
  SearchRanges ranges_;
  ArchGenome target_;
  double preferred_lr_ = 0.1;
};

struct LrProbeResult {
  double learning_rate = 0.0;
  std::vector<FitnessRecord> records;  // one per candidate, in candidate order
};

/// Evaluates the fully connected network of `arch` once per candidate rate
/// and keeps the best; ties go to the smaller rate.
LrProbeResult probe_learning_rate(const ArchGenome& arch, const std::vector<double>& candidates,
                                  const EvalBudget& budget, Evaluator& evaluator,
                                  const std::string& request_prefix = "probe");

}  // namespace hgapso
