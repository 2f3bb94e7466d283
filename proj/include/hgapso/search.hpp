#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hgapso/fitness.hpp"
#include "hgapso/ga.hpp"
#include "hgapso/pso.hpp"
#include "hgapso/trainer.hpp"

namespace hgapso {

struct EvaluatorConfig {
  EvaluatorKind kind = EvaluatorKind::kSurrogate;
  int epochs = 5;
  std::vector<double> lr_candidates{0.9, 0.1, 0.01};
  /// Share of the training part used by inner (connection) evaluations.
  double second_level_fraction = 0.5;
  int num_classes = 10;
  SurrogateConfig surrogate;
  TrainerEndpoint trainer;
  /// Fitness cache; defaults to on for the surrogate and off for the trainer.
  std::optional<bool> cache;

  bool cache_enabled() const { return cache.value_or(kind == EvaluatorKind::kSurrogate); }
  friend bool operator==(const EvaluatorConfig&, const EvaluatorConfig&) = default;
};

struct SearchConfig {
  SearchRanges ranges;
  PsoParams pso;
  GaParams ga;
  int outer_population = 20;
  int outer_generations = 10;
  EvaluatorConfig evaluator;
  std::uint64_t search_seed = 1;
  std::uint64_t oracle_seed = 0x5eed;
  /// Generations between checkpoints; 0 disables periodic checkpoints.
  int checkpoint_interval = 1;
  /// Upper bound on inner evolutions running at once.
  int concurrency = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  EvalBudget budget(double data_fraction) const;
  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

struct GlobalBest {
  std::vector<double> position;
  ArchGenome arch;
  ConnGenome conn;
  FitnessRecord record;
  friend bool operator==(const GlobalBest&, const GlobalBest&) = default;
};

struct ParticleSnapshot {
  ArchGenome arch;
  ConnGenome conn;
  double fitness = 0.0;
  friend bool operator==(const ParticleSnapshot&, const ParticleSnapshot&) = default;
};

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  /// Cumulative evaluation requests at the end of the generation.
  std::uint64_t evaluations = 0;
  std::vector<ParticleSnapshot> population;
  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

/// Everything needed to continue a run. Random streams are derived from
/// (search seed, generation, particle), so no engine state is carried.
struct SearchState {
  SearchConfig config;
  int generation = 0;  // completed outer generations
  std::vector<Particle> particles;
  std::optional<GlobalBest> global_best;
  std::vector<GenerationRecord> history;
  std::uint64_t evaluation_count = 0;
  friend bool operator==(const SearchState&, const SearchState&) = default;
};

struct SearchResult {
  std::optional<GlobalBest> global_best;
  std::vector<GenerationRecord> history;
  std::uint64_t evaluation_count = 0;
  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// Thread-safe memo in front of an evaluator, keyed on the genome texts,
/// evaluator tag, data fraction, learning rate and seed.
class CachingEvaluator final : public Evaluator {
 public:
  CachingEvaluator(Evaluator& inner, bool enabled) : inner_(inner), enabled_(enabled) {}

  EvaluatorKind kind() const override { return inner_.kind(); }
  bool deterministic() const override { return inner_.deterministic(); }
  FitnessRecord evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) override;

  std::size_t hits() const;

 private:
  Evaluator& inner_;
  bool enabled_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, FitnessRecord> memo_;
  std::size_t hits_ = 0;
};

struct InnerResult {
  ConnGenome conn;
  FitnessRecord record;
  double learning_rate = 0.0;
  std::uint64_t evaluations = 0;
  /// Best fitness after each inner generation.
  std::vector<double> best_per_generation;
};

/// LR probe on the dense baseline, then a full GA over connection genomes of
/// `arch`. An architecture without skip slots is evaluated once.
InnerResult inner_evolve(const ArchGenome& arch, const SearchConfig& config, Evaluator& evaluator, Rng& rng,
                         const std::string& request_prefix);

std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& config);

/// Random initial swarm, generation 0.
SearchState initial_state(const SearchConfig& config);

/// Two-level search: each outer generation moves the swarm, runs one inner
/// GA per particle (concurrently up to config.concurrency), confirms each
/// inner winner on the full training part and updates the bests.
class Search {
 public:
  Search(SearchConfig config, Evaluator& evaluator);
  Search(SearchState state, Evaluator& evaluator);

  bool done() const { return state_.generation >= state_.config.outer_generations; }
  /// Runs one outer generation. State is untouched if an evaluation fails.
  const GenerationRecord& step();
  void run(const std::function<void(const Search&)>& after_generation = {});

  const SearchState& state() const { return state_; }
  SearchResult result() const;
  std::size_t cache_hits() const { return cache_.hits(); }

 private:
  SearchState state_;
  Evaluator& evaluator_;
  CachingEvaluator cache_;
};

SearchResult run_search(const SearchConfig& config, Evaluator& evaluator);
SearchResult run_search(const SearchConfig& config);

/// Evaluates `budget` random (architecture, connections, rate) triples on
/// the full training part and returns the best fitness.
double random_search(const SearchConfig& config, Evaluator& evaluator, std::uint64_t budget, std::uint64_t seed);

// Serialization -----------------------------------------------------------

std::string config_to_json(const SearchConfig& config);
SearchConfig config_from_json(const std::string& text);
std::string result_to_json(const SearchResult& result);

/// Canonical, checksummed checkpoint bytes.
std::string checkpoint(const SearchState& state);
/// Throws CheckpointError on corruption or version mismatch.
SearchState resume(const std::string& bytes);

}  // namespace hgapso
