#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>

#include "hgapso/error.hpp"
#include "hgapso/search.hpp"

using namespace hgapso;

namespace {

SearchConfig small_config(std::uint64_t seed = 3) {
  SearchConfig c;
  c.ranges = SearchRanges::for_input(1, 28, 28);
  c.outer_population = 6;
  c.outer_generations = 3;
  c.ga.population_size = 10;
  c.ga.generations = 4;
  c.search_seed = seed;
  c.oracle_seed = 77;
  c.evaluator.surrogate.target_blocks = 2;
  return c;
}

/// Records every request and forwards it.
class LoggingEvaluator final : public Evaluator {
 public:
  explicit LoggingEvaluator(Evaluator& inner) : inner_(inner) {}
  EvaluatorKind kind() const override { return inner_.kind(); }
  bool deterministic() const override { return inner_.deterministic(); }
  FitnessRecord evaluate(const ArchGenome& a, const ConnGenome& c, const EvalRequest& r) override {
    auto rec = inner_.evaluate(a, c, r);
    std::lock_guard lock(mu);
    log.push_back(r);
    fitness.push_back(rec.fitness);
    return rec;
  }
  std::mutex mu;
  std::vector<EvalRequest> log;
  std::vector<double> fitness;

 private:
  Evaluator& inner_;
};

/// Surrogate posing as a stochastic trainer.
class NoisyEvaluator final : public Evaluator {
 public:
  explicit NoisyEvaluator(Evaluator& inner) : inner_(inner) {}
  EvaluatorKind kind() const override { return EvaluatorKind::kTrainer; }
  bool deterministic() const override { return false; }
  FitnessRecord evaluate(const ArchGenome& a, const ConnGenome& c, const EvalRequest& r) override {
    std::lock_guard lock(mu);
    ids.push_back(r.request_id);
    auto rec = inner_.evaluate(a, c, r);
    rec.evaluator = EvaluatorKind::kTrainer;
    return rec;
  }
  std::mutex mu;
  std::vector<std::string> ids;

 private:
  Evaluator& inner_;
};

class FailingEvaluator final : public Evaluator {
 public:
  explicit FailingEvaluator(Evaluator& inner, int fail_after) : inner_(inner), left_(fail_after) {}
  EvaluatorKind kind() const override { return inner_.kind(); }
  bool deterministic() const override { return true; }
  FitnessRecord evaluate(const ArchGenome& a, const ConnGenome& c, const EvalRequest& r) override {
    if (left_-- <= 0) throw EvaluationError(EvaluationError::Kind::kTransport, "gone");
    return inner_.evaluate(a, c, r);
  }

 private:
  Evaluator& inner_;
  std::atomic<int> left_;
};

}  // namespace

TEST_CASE("zero outer generations gives an empty result") {
  auto cfg = small_config();
  cfg.outer_generations = 0;
  const auto r = run_search(cfg);
  CHECK_FALSE(r.global_best.has_value());
  CHECK(r.history.empty());
  CHECK(r.evaluation_count == 0);
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  cfg.outer_population = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.ga.mutation_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.evaluator.surrogate.target_blocks = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.concurrency = 0;
  CHECK_THROWS_AS(run_search(cfg), ConfigError);
}

TEST_CASE("search is deterministic and independent of concurrency") {
  auto cfg = small_config();
  const auto a = run_search(cfg);
  const auto b = run_search(cfg);
  CHECK(a == b);
  CHECK(result_to_json(a) == result_to_json(b));
  cfg.concurrency = 4;
  const auto c = run_search(cfg);
  CHECK(result_to_json(a) == result_to_json(c));

  // Caching only saves work; it never changes the answer.
  cfg.evaluator.cache = false;
  CHECK(result_to_json(run_search(cfg)) == result_to_json(a));

  cfg.search_seed = 4;
  CHECK(result_to_json(run_search(cfg)) != result_to_json(a));
}

TEST_CASE("history, bests and evaluation accounting") {
  const auto cfg = small_config();
  auto surrogate = make_evaluator(cfg);
  LoggingEvaluator log(*surrogate);
  auto no_cache = cfg;
  no_cache.evaluator.cache = false;
  const auto r = run_search(no_cache, log);

  REQUIRE(r.history.size() == 3);
  REQUIRE(r.global_best.has_value());
  double prev = -1;
  for (std::size_t g = 0; g < r.history.size(); ++g) {
    const auto& h = r.history[g];
    CHECK(h.generation == static_cast<int>(g) + 1);
    CHECK(h.best_fitness >= prev);
    CHECK(h.best_fitness >= h.mean_fitness);
    CHECK(h.population.size() == 6);
    for (const auto& p : h.population) CHECK(p.fitness <= h.best_fitness);
    prev = h.best_fitness;
  }
  CHECK(r.global_best->record.fitness == r.history.back().best_fitness);
  CHECK(decode_position(r.global_best->position, cfg.ranges) == r.global_best->arch);
  CHECK(r.global_best->conn.matches(r.global_best->arch));

  // Every request was counted, and the bound per particle holds:
  // probe + pop + (gens - 1) * (pop - elites) + confirmation.
  CHECK(r.evaluation_count == log.log.size());
  const std::uint64_t per_particle = 3 + 10 + 3 * (10 - 1) + 1;
  CHECK(r.evaluation_count <= 3 * 6 * per_particle);

  // Inner evaluations use the reduced training share, confirmations the full one.
  std::set<std::string> ids;
  for (const auto& req : log.log) {
    ids.insert(req.request_id);
    const bool confirm = req.request_id.ends_with("-confirm");
    CHECK(req.data_fraction == (confirm ? 1.0 : 0.5));
    CHECK(req.chosen_lr.has_value());
  }
  CHECK(ids.size() == log.log.size());
}

TEST_CASE("the fitness cache absorbs repeated requests") {
  auto cfg = small_config();
  auto surrogate = make_evaluator(cfg);
  Search search(cfg, *surrogate);
  search.run();
  // Every particle re-probes the dense baseline of its architecture; later
  // generations revisit architectures, so some requests repeat.
  CHECK(search.cache_hits() > 0);
  cfg.evaluator.kind = EvaluatorKind::kTrainer;
  CHECK_FALSE(cfg.evaluator.cache_enabled());
}

TEST_CASE("stochastic evaluators re-evaluate the incumbent best") {
  auto cfg = small_config();
  cfg.outer_generations = 2;
  cfg.evaluator.cache = false;
  auto surrogate = make_evaluator(cfg);
  NoisyEvaluator noisy(*surrogate);
  const auto r = run_search(cfg, noisy);
  const auto n = std::count_if(noisy.ids.begin(), noisy.ids.end(), [](const std::string& s) { return s.ends_with("-gbest"); });
  CHECK(n == 1);  // once per generation after the first
  CHECK(r.evaluation_count == noisy.ids.size());
}

TEST_CASE("a failed evaluation leaves the state untouched") {
  const auto cfg = small_config();
  auto surrogate = make_evaluator(cfg);
  FailingEvaluator failing(*surrogate, 150);
  Search search(cfg, failing);
  const SearchState before = search.state();
  CHECK_THROWS_AS(search.step(), EvaluationError);
  CHECK(search.state() == before);
}

TEST_CASE("inner_evolve") {
  auto cfg = small_config();
  auto surrogate = make_evaluator(cfg);

  SUBCASE("single-layer block has nothing to search") {
    cfg.ranges.layers = {1, 8};
    LoggingEvaluator log(*surrogate);
    Rng rng(1);
    const auto res = inner_evolve(ArchGenome{{{1, 8}}}, cfg, log, rng, "t");
    CHECK(res.conn.empty());
    CHECK(res.evaluations == 1 + 3);
    CHECK(log.log.size() == 4);
    CHECK(log.log.back().request_id == "t-ga0-i0");
  }
  SUBCASE("winner is the best evaluated individual") {
    LoggingEvaluator log(*surrogate);
    Rng rng(2);
    const ArchGenome arch{{{6, 12}, {5, 20}}};
    const auto res = inner_evolve(arch, cfg, log, rng, "t");
    const auto& sur = dynamic_cast<SurrogateEvaluator&>(*surrogate);
    // Skip the three probe requests.
    const double best = *std::max_element(log.fitness.begin() + 3, log.fitness.end());
    CHECK(res.record.fitness == best);
    CHECK(res.record.fitness == res.best_per_generation.back());
    CHECK(res.evaluations == 3 + 10 + 3 * 9);
    CHECK(res.record.fitness == doctest::Approx(sur.fitness(arch, res.conn, res.learning_rate)));
    for (std::size_t g = 1; g < res.best_per_generation.size(); ++g)
      CHECK(res.best_per_generation[g] >= res.best_per_generation[g - 1]);
  }
}

TEST_CASE("inner GA on the hidden target never regresses") {
  auto cfg = small_config();
  cfg.ga.population_size = 20;
  cfg.ga.generations = 10;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.oracle_seed = 1000 + seed;
    cfg.evaluator.surrogate.target_blocks = 3;
    auto surrogate = make_evaluator(cfg);
    const auto target = dynamic_cast<SurrogateEvaluator&>(*surrogate).target_arch();
    Rng rng(seed);
    const auto res = inner_evolve(target, cfg, *surrogate, rng, "m");
    REQUIRE(res.best_per_generation.size() == 10);
    CHECK(res.best_per_generation.back() >= res.best_per_generation.front());
  }
}

TEST_CASE("random search baseline") {
  const auto cfg = small_config();
  auto surrogate = make_evaluator(cfg);
  LoggingEvaluator log(*surrogate);
  const double best = random_search(cfg, log, 50, 9);
  CHECK(log.log.size() == 50);
  CHECK(best > 0.0);
  CHECK(best <= 1.0);
  CHECK(random_search(cfg, *surrogate, 50, 9) == best);
}
