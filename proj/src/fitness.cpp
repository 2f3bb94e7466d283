#include "hgapso/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "hgapso/error.hpp"
#include "hgapso/rng.hpp"

namespace hgapso {

std::string_view to_string(EvaluatorKind kind) {
  return kind == EvaluatorKind::kSurrogate ? "surrogate" : "trainer";
}

EvaluatorKind evaluator_kind_from_string(std::string_view name) {
  if (name == "surrogate") return EvaluatorKind::kSurrogate;
  if (name == "trainer") return EvaluatorKind::kTrainer;
  throw InvalidArgument("unknown evaluator '" + std::string(name) + "'");
}

void EvalRequest::validate() const {
  if (request_id.empty()) throw InvalidArgument("request: empty request_id");
  if (epochs < 1) throw InvalidArgument("request: epochs must be >= 1");
  if (!(data_fraction > 0.0 && data_fraction <= 1.0)) throw InvalidArgument("request: data_fraction must lie in (0, 1]");
  if (!chosen_lr && lr_candidates.empty()) throw InvalidArgument("request: lr_candidates empty and no chosen_lr");
}

EvalRequest make_request(const ArchGenome& arch, const ConnGenome& conn, const EvalBudget& budget,
                         std::string request_id, std::optional<double> chosen_lr) {
  EvalRequest r;
  r.request_id = std::move(request_id);
  r.graph = export_graph(build_graph(arch, conn, budget.input_shape, budget.num_classes), ExportFormat::kCanonical);
  r.epochs = budget.epochs;
  r.lr_candidates = budget.lr_candidates;
  r.chosen_lr = chosen_lr;
  r.data_fraction = budget.data_fraction;
  r.seed = budget.seed;
  r.validate();
  return r;
}

// --- surrogate ---------------------------------------------------------------

SurrogateEvaluator::SurrogateEvaluator(SurrogateConfig config, SearchRanges ranges)
    : config_(std::move(config)), ranges_(ranges) {
  ranges_.validate();
  Rng rng(derive_seed(config_.oracle_seed, {0xA1}));
  int blocks = 0;
  if (config_.target_blocks) {
    blocks = *config_.target_blocks;
    if (blocks < ranges_.min_blocks || blocks > ranges_.max_blocks)
      throw InvalidArgument("surrogate: target_blocks outside the block range");
  } else {
    blocks = static_cast<int>(rng.uniform_int(ranges_.min_blocks, ranges_.max_blocks));
  }
  for (int b = 0; b < blocks; ++b) target_.blocks.push_back(random_block(ranges_, rng));
  if (config_.preferred_lr) {
    preferred_lr_ = *config_.preferred_lr;
  } else {
    if (config_.lr_choices.empty()) throw InvalidArgument("surrogate: lr_choices is empty");
    preferred_lr_ = config_.lr_choices[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(config_.lr_choices.size()) - 1))];
  }
}

bool SurrogateEvaluator::target_bit(std::size_t block, int source, int target) const {
  return (derive_seed(config_.oracle_seed, {0xC0, block, static_cast<std::uint64_t>(source),
                                            static_cast<std::uint64_t>(target)}) &
          1U) != 0;
}

ConnGenome SurrogateEvaluator::target_conn(const ArchGenome& arch) const {
  ConnGenome g = ConnGenome::zeros(arch);
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const int layers = arch.blocks[b].num_layers;
    const auto start = g.segments()[b].start;
    for (int i = 0; i + 2 <= layers; ++i) {
      for (int j = i + 2; j <= layers; ++j) g.set(start + ConnGenome::pair_offset(layers, i, j), target_bit(b, i, j));
    }
  }
  return g;
}

double SurrogateEvaluator::arch_score(const ArchGenome& arch) const {
  const std::size_t slots = std::max(arch.blocks.size(), target_.blocks.size());
  if (slots == 0) return 1.0;
  const double layer_span = ranges_.layers.hi - ranges_.layers.lo;
  const double growth_span = ranges_.growth.hi - ranges_.growth.lo;
  double distance = 0.0;
  for (std::size_t b = 0; b < slots; ++b) {
    if (b >= arch.blocks.size() || b >= target_.blocks.size()) {
      distance += 1.0;
      continue;
    }
    const auto& mine = arch.blocks[b];
    const auto& goal = target_.blocks[b];
    const double dl = layer_span > 0 ? std::min(1.0, std::abs(mine.num_layers - goal.num_layers) / layer_span) : 0.0;
    const double dk = growth_span > 0 ? std::min(1.0, std::abs(mine.growth_rate - goal.growth_rate) / growth_span) : 0.0;
    distance += 0.5 * (dl + dk);
  }
  return 1.0 - distance / static_cast<double>(slots);
}

double SurrogateEvaluator::conn_score(const ArchGenome& arch, const ConnGenome& conn) const {
  if (!conn.matches(arch)) throw InvalidArgument("surrogate: connection genome does not fit the architecture");
  const std::size_t shared = std::min(arch.blocks.size(), target_.blocks.size());
  std::size_t total = 0;
  std::size_t agree = 0;
  for (std::size_t b = 0; b < shared; ++b) {
    const int layers = arch.blocks[b].num_layers;
    for (int i = 0; i + 2 <= layers; ++i) {
      for (int j = i + 2; j <= layers; ++j) {
        ++total;
        if (conn.has_edge(b, i, j) == target_bit(b, i, j)) ++agree;
      }
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

double SurrogateEvaluator::fitness(const ArchGenome& arch, const ConnGenome& conn, double lr) const {
  const double f = 0.5 * arch_score(arch) + 0.4 * conn_score(arch, conn) + 0.1 * lr_score(lr);
  return std::clamp(f, 0.0, 1.0);
}

FitnessRecord SurrogateEvaluator::evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) {
  request.validate();
  double lr = 0.0;
  if (request.chosen_lr) {
    lr = *request.chosen_lr;
  } else {
    // No probe ran: the best candidate is the preferred rate when offered.
    auto sorted = request.lr_candidates;
    std::sort(sorted.begin(), sorted.end());
    lr = std::find(sorted.begin(), sorted.end(), preferred_lr_) != sorted.end() ? preferred_lr_ : sorted.front();
  }
  FitnessRecord rec;
  rec.fitness = fitness(arch, conn, lr);
  rec.chosen_lr = lr;
  rec.evaluator = EvaluatorKind::kSurrogate;
  rec.seed = request.seed;
  rec.data_fraction = request.data_fraction;
  rec.epochs = request.epochs;
  rec.wall_time = 0.0;
  return rec;
}

// --- learning-rate probe -----------------------------------------------------

namespace {

std::string format_lr(double lr) {
  std::string s = std::to_string(lr);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

LrProbeResult probe_learning_rate(const ArchGenome& arch, const std::vector<double>& candidates,
                                  const EvalBudget& budget, Evaluator& evaluator, const std::string& request_prefix) {
  if (candidates.empty()) throw InvalidArgument("probe_learning_rate: no candidates");
  const ConnGenome dense = ConnGenome::ones(arch);
  LrProbeResult out;
  out.records.reserve(candidates.size());
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double lr = candidates[c];
    EvalRequest req = make_request(arch, dense, budget, request_prefix + "-lr" + std::to_string(c), lr);
    FitnessRecord rec;
    try {
      rec = evaluator.evaluate(arch, dense, req);
    } catch (const EvaluationError& e) {
      throw EvaluationError(e.kind(), "lr probe candidate " + format_lr(lr) + ": " + e.what());
    } catch (const ProtocolError& e) {
      throw ProtocolError("lr probe candidate " + format_lr(lr) + ": " + e.what(), e.raw_payload());
    }
    out.records.push_back(rec);
    if (!best) {
      best = c;
      continue;
    }
    const double incumbent = out.records[*best].fitness;
    if (rec.fitness > incumbent || (rec.fitness == incumbent && lr < candidates[*best])) best = c;
  }
  out.learning_rate = candidates[*best];
  return out;
}

}  // namespace hgapso
