#include "hgapso/search.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "hgapso/error.hpp"

namespace hgapso {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kPsoStream = 0x9507;
constexpr std::uint64_t kInnerStream = 0x6a11;
constexpr std::uint64_t kRandomSearchStream = 0x7a4d;

/// Counts the requests one task issues.
class CountingEvaluator final : public Evaluator {
 public:
  explicit CountingEvaluator(Evaluator& inner) : inner_(inner) {}
  EvaluatorKind kind() const override { return inner_.kind(); }
  bool deterministic() const override { return inner_.deterministic(); }
  FitnessRecord evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) override {
    ++count_;
    return inner_.evaluate(arch, conn, request);
  }
  std::uint64_t count() const { return count_; }

 private:
  Evaluator& inner_;
  std::uint64_t count_ = 0;
};

std::string lr_text(double lr) {
  std::ostringstream os;
  os.precision(17);
  os << lr;
  return os.str();
}

}  // namespace

// --- config ------------------------------------------------------------------

void SearchConfig::validate() const {
  try {
    ranges.validate();
    pso.validate();
    ga.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (outer_population < 2) throw ConfigError("outer_population must be >= 2");
  if (outer_generations < 0) throw ConfigError("outer_generations must be >= 0");
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
  if (evaluator.epochs < 1) throw ConfigError("evaluator.epochs must be >= 1");
  if (evaluator.lr_candidates.empty()) throw ConfigError("evaluator.lr_candidates must not be empty");
  if (!(evaluator.second_level_fraction > 0.0 && evaluator.second_level_fraction <= 1.0))
    throw ConfigError("evaluator.second_level_fraction must lie in (0, 1]");
  if (evaluator.num_classes < 1) throw ConfigError("evaluator.num_classes must be >= 1");
  if (const auto& t = evaluator.surrogate.target_blocks; t && (*t < ranges.min_blocks || *t > ranges.max_blocks))
    throw ConfigError("surrogate.target_blocks lies outside [min_blocks, max_blocks]");
  if (evaluator.kind == EvaluatorKind::kTrainer && !(evaluator.trainer.timeout_seconds > 0.0))
    throw ConfigError("trainer.timeout_seconds must be positive");
}

EvalBudget SearchConfig::budget(double data_fraction) const {
  EvalBudget b;
  b.input_shape = {ranges.input_channels, ranges.input_height, ranges.input_width};
  b.num_classes = evaluator.num_classes;
  b.epochs = evaluator.epochs;
  b.lr_candidates = evaluator.lr_candidates;
  b.data_fraction = data_fraction;
  b.seed = static_cast<std::int64_t>(search_seed);
  return b;
}

// --- cache -------------------------------------------------------------------

FitnessRecord CachingEvaluator::evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) {
  if (!enabled_) return inner_.evaluate(arch, conn, request);
  std::string key = genome_to_json(arch, conn);
  key += '|';
  key += to_string(inner_.kind());
  key += '|' + lr_text(request.data_fraction);
  key += '|' + (request.chosen_lr ? lr_text(*request.chosen_lr) : std::string("none"));
  key += '|' + std::to_string(request.seed);
  key += '|' + std::to_string(request.epochs);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) {
      ++hits_;
      return it->second;
    }
  }
  FitnessRecord rec = inner_.evaluate(arch, conn, request);
  std::lock_guard lock(mutex_);
  memo_.emplace(std::move(key), rec);
  return rec;
}

std::size_t CachingEvaluator::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

// --- inner evolution ---------------------------------------------------------

InnerResult inner_evolve(const ArchGenome& arch, const SearchConfig& config, Evaluator& evaluator, Rng& rng,
                         const std::string& request_prefix) {
  arch.validate(config.ranges);
  CountingEvaluator counted(evaluator);
  const EvalBudget budget = config.budget(config.evaluator.second_level_fraction);

  InnerResult out;
  out.learning_rate =
      probe_learning_rate(arch, config.evaluator.lr_candidates, budget, counted, request_prefix + "-probe")
          .learning_rate;

  auto evaluate = [&](const ConnGenome& conn, int generation, std::size_t index) {
    const std::string id = request_prefix + "-ga" + std::to_string(generation) + "-i" + std::to_string(index);
    try {
      return counted.evaluate(arch, conn, make_request(arch, conn, budget, id, out.learning_rate));
    } catch (const EvaluationError& e) {
      throw EvaluationError(e.kind(), "inner generation " + std::to_string(generation) + " individual " +
                                          std::to_string(index) + ": " + e.what());
    }
  };

  const ConnGenome empty_layout = ConnGenome::zeros(arch);
  if (empty_layout.empty()) {
    out.conn = empty_layout;
    out.record = evaluate(out.conn, 0, 0);
    out.best_per_generation.push_back(out.record.fitness);
    out.evaluations = counted.count();
    return out;
  }

  const GaParams& ga = config.ga;
  const auto pop_size = static_cast<std::size_t>(ga.population_size);
  std::vector<ConnGenome> population;
  population.reserve(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) population.push_back(random_conn(arch, rng));

  std::vector<FitnessRecord> records(pop_size);
  std::vector<double> fitness(pop_size);
  bool have_best = false;
  auto consider = [&](std::size_t i) {
    if (!have_best || records[i].fitness > out.record.fitness) {
      out.conn = population[i];
      out.record = records[i];
      have_best = true;
    }
  };

  for (std::size_t i = 0; i < pop_size; ++i) {
    records[i] = evaluate(population[i], 0, i);
    fitness[i] = records[i].fitness;
    consider(i);
  }
  out.best_per_generation.push_back(out.record.fitness);

  const auto elites = static_cast<std::size_t>(ga.elite_count());
  for (int g = 1; g < ga.generations; ++g) {
    const auto elite_idx = rank_indices(fitness, elites);
    std::vector<FitnessRecord> next_records(pop_size);
    for (std::size_t k = 0; k < elite_idx.size(); ++k) next_records[k] = records[elite_idx[k]];
    population = evolve_generation(population, fitness, ga, rng);
    records = std::move(next_records);
    for (std::size_t i = elites; i < pop_size; ++i) records[i] = evaluate(population[i], g, i);
    for (std::size_t i = 0; i < pop_size; ++i) {
      fitness[i] = records[i].fitness;
      consider(i);
    }
    out.best_per_generation.push_back(out.record.fitness);
  }
  out.evaluations = counted.count();
  return out;
}

// --- outer loop --------------------------------------------------------------

std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& config) {
  if (config.evaluator.kind == EvaluatorKind::kSurrogate) {
    SurrogateConfig sc = config.evaluator.surrogate;
    sc.oracle_seed = config.oracle_seed;
    return std::make_unique<SurrogateEvaluator>(sc, config.ranges);
  }
  return std::make_unique<TrainerEvaluator>(config.evaluator.trainer);
}

SearchState initial_state(const SearchConfig& config) {
  config.validate();
  SearchState s;
  s.config = config;
  Rng rng(derive_seed(config.search_seed, {kInitStream}));
  for (int i = 0; i < config.outer_population; ++i) s.particles.push_back(make_particle(random_arch(config.ranges, rng)));
  return s;
}

Search::Search(SearchConfig config, Evaluator& evaluator)
    : Search(initial_state(config), evaluator) {}

Search::Search(SearchState state, Evaluator& evaluator)
    : state_(std::move(state)), evaluator_(evaluator), cache_(evaluator, state_.config.evaluator.cache_enabled()) {
  state_.config.validate();
  if (state_.particles.size() != static_cast<std::size_t>(state_.config.outer_population))
    throw ConfigError("search state: particle count differs from outer_population");
}

const GenerationRecord& Search::step() {
  if (done()) throw Error("search already finished");
  const SearchConfig& cfg = state_.config;
  const int t = state_.generation;
  const auto n = state_.particles.size();

  std::vector<Particle> particles = state_.particles;
  if (state_.global_best) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(cfg.search_seed, {kPsoStream, static_cast<std::uint64_t>(t), i}));
      particles[i] = update_particle(std::move(particles[i]), state_.global_best->position, cfg.pso, rng);
      particles[i] = change_block_count(std::move(particles[i]), state_.global_best->position, cfg.pso, cfg.ranges, rng);
    }
  }

  struct Outcome {
    ArchGenome arch;
    InnerResult inner;
    FitnessRecord confirmed;
    std::uint64_t evaluations = 0;
  };
  std::vector<Outcome> outcomes(n);
  std::vector<std::exception_ptr> failures(n);
  const std::string seed_tag = "s" + std::to_string(cfg.search_seed) + "-g" + std::to_string(t);

  auto run_task = [&](std::size_t i) {
    try {
      Outcome& o = outcomes[i];
      o.arch = decode_position(particles[i].position, cfg.ranges);
      Rng rng(derive_seed(cfg.search_seed, {kInnerStream, static_cast<std::uint64_t>(t), i}));
      const std::string prefix = seed_tag + "-p" + std::to_string(i);
      o.inner = inner_evolve(o.arch, cfg, cache_, rng, prefix);
      // First-level fitness: the inner winner on the full training part.
      const EvalRequest req =
          make_request(o.arch, o.inner.conn, cfg.budget(1.0), prefix + "-confirm", o.inner.learning_rate);
      o.confirmed = cache_.evaluate(o.arch, o.inner.conn, req);
      o.evaluations = o.inner.evaluations + 1;
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_task(i);
      });
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  // Commit on the coordinating thread, in particle order.
  std::optional<GlobalBest> gbest = state_.global_best;
  if (gbest && !evaluator_.deterministic()) {
    const EvalRequest req = make_request(gbest->arch, gbest->conn, cfg.budget(1.0), seed_tag + "-gbest",
                                         gbest->record.chosen_lr);
    gbest->record = evaluator_.evaluate(gbest->arch, gbest->conn, req);
    ++state_.evaluation_count;
  }

  GenerationRecord rec;
  rec.generation = t + 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Outcome& o = outcomes[i];
    particles[i].offer(particles[i].position, o.inner.conn, o.confirmed);
    const PersonalBest& pb = *particles[i].personal_best;
    if (!gbest || pb.record.fitness > gbest->record.fitness) {
      gbest = GlobalBest{pb.position, decode_position(pb.position, cfg.ranges), pb.conn, pb.record};
    }
    sum += o.confirmed.fitness;
    state_.evaluation_count += o.evaluations;
    rec.population.push_back({o.arch, o.inner.conn, o.confirmed.fitness});
  }
  rec.mean_fitness = sum / static_cast<double>(n);
  rec.best_fitness = gbest->record.fitness;
  rec.evaluations = state_.evaluation_count;

  state_.particles = std::move(particles);
  state_.global_best = std::move(gbest);
  state_.history.push_back(std::move(rec));
  state_.generation = t + 1;
  return state_.history.back();
}

void Search::run(const std::function<void(const Search&)>& after_generation) {
  while (!done()) {
    step();
    if (after_generation) after_generation(*this);
  }
}

SearchResult Search::result() const {
  return SearchResult{state_.global_best, state_.history, state_.evaluation_count};
}

SearchResult run_search(const SearchConfig& config, Evaluator& evaluator) {
  Search search(config, evaluator);
  search.run();
  return search.result();
}

SearchResult run_search(const SearchConfig& config) {
  config.validate();
  auto evaluator = make_evaluator(config);
  return run_search(config, *evaluator);
}

double random_search(const SearchConfig& config, Evaluator& evaluator, std::uint64_t budget, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, {kRandomSearchStream}));
  const EvalBudget eval_budget = config.budget(1.0);
  const auto& lrs = config.evaluator.lr_candidates;
  double best = 0.0;
  for (std::uint64_t k = 0; k < budget; ++k) {
    const ArchGenome arch = random_arch(config.ranges, rng);
    const ConnGenome conn = random_conn(arch, rng);
    const double lr = lrs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(lrs.size()) - 1))];
    const auto rec = evaluator.evaluate(arch, conn, make_request(arch, conn, eval_budget, "rs-" + std::to_string(k), lr));
    best = std::max(best, rec.fitness);
  }
  return best;
}

}  // namespace hgapso
