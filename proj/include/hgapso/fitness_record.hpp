#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hgapso {

enum class EvaluatorKind { kSurrogate, kTrainer };

std::string_view to_string(EvaluatorKind kind);
EvaluatorKind evaluator_kind_from_string(std::string_view name);

/// Outcome of one fitness evaluation. `fitness` is the accuracy on the
/// held-out test part, always in [0, 1].
struct FitnessRecord {
  double fitness = 0.0;
  double chosen_lr = 0.0;
  EvaluatorKind evaluator = EvaluatorKind::kSurrogate;
  std::int64_t seed = 0;
  double data_fraction = 1.0;
  int epochs = 0;
  double wall_time = 0.0;

  friend bool operator==(const FitnessRecord&, const FitnessRecord&) = default;
};

}  // namespace hgapso
