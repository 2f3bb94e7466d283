#include <zlib.h>

#include <cstdio>

#include <nlohmann/json.hpp>

#include "hgapso/error.hpp"
#include "hgapso/search.hpp"

namespace hgapso {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kCheckpointFormat = "hgapso-checkpoint";
constexpr int kCheckpointVersion = 1;

template <typename T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

ojson range_json(const IntRange& r) { return ojson::array({r.lo, r.hi}); }
IntRange range_from(const nlohmann::json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

ojson record_json(const FitnessRecord& r) {
  ojson j;
  j["fitness"] = r.fitness;
  j["chosen_lr"] = r.chosen_lr;
  j["evaluator"] = std::string(to_string(r.evaluator));
  j["seed"] = r.seed;
  j["data_fraction"] = r.data_fraction;
  j["epochs"] = r.epochs;
  j["wall_time"] = r.wall_time;
  return j;
}

FitnessRecord record_from(const nlohmann::json& j) {
  FitnessRecord r;
  r.fitness = j.at("fitness").get<double>();
  r.chosen_lr = j.at("chosen_lr").get<double>();
  r.evaluator = evaluator_kind_from_string(j.at("evaluator").get<std::string>());
  r.seed = j.at("seed").get<std::int64_t>();
  r.data_fraction = j.at("data_fraction").get<double>();
  r.epochs = j.at("epochs").get<int>();
  r.wall_time = j.at("wall_time").get<double>();
  return r;
}

ojson genome_json(const ArchGenome& arch, const ConnGenome& conn) { return ojson::parse(genome_to_json(arch, conn)); }

ojson config_json(const SearchConfig& c) {
  ojson j;
  j["search"] = {{"outer_population", c.outer_population},
                 {"outer_generations", c.outer_generations},
                 {"search_seed", c.search_seed},
                 {"oracle_seed", c.oracle_seed},
                 {"checkpoint_interval", c.checkpoint_interval},
                 {"concurrency", c.concurrency}};
  j["ranges"] = {{"min_blocks", c.ranges.min_blocks},
                 {"max_blocks", c.ranges.max_blocks},
                 {"layers", range_json(c.ranges.layers)},
                 {"growth", range_json(c.ranges.growth)},
                 {"input_channels", c.ranges.input_channels},
                 {"input_height", c.ranges.input_height},
                 {"input_width", c.ranges.input_width}};
  j["pso"] = {{"w", c.pso.w}, {"c1", c.pso.c1}, {"c2", c.pso.c2}, {"r_cb", c.pso.r_cb}};
  j["ga"] = {{"mutation_rate", c.ga.mutation_rate},
             {"crossover_rate", c.ga.crossover_rate},
             {"elitism_rate", c.ga.elitism_rate},
             {"population_size", c.ga.population_size},
             {"generations", c.ga.generations},
             {"tournament_size", c.ga.tournament_size}};
  const auto& e = c.evaluator;
  ojson ev;
  ev["kind"] = std::string(to_string(e.kind));
  ev["epochs"] = e.epochs;
  ev["lr_candidates"] = e.lr_candidates;
  ev["second_level_fraction"] = e.second_level_fraction;
  ev["num_classes"] = e.num_classes;
  ev["cache"] = optional_json(e.cache);
  ev["surrogate"] = {{"target_blocks", optional_json(e.surrogate.target_blocks)},
                     {"preferred_lr", optional_json(e.surrogate.preferred_lr)},
                     {"lr_choices", e.surrogate.lr_choices}};
  ev["trainer"] = {{"address", e.trainer.address},
                   {"timeout_seconds", e.trainer.timeout_seconds},
                   {"dataset",
                    {{"name", e.trainer.dataset.name},
                     {"path", e.trainer.dataset.path},
                     {"num_classes", e.trainer.dataset.num_classes}}}};
  j["evaluator"] = std::move(ev);
  return j;
}

SearchConfig config_from(const nlohmann::json& j) {
  SearchConfig c;
  const auto& s = j.at("search");
  c.outer_population = s.at("outer_population").get<int>();
  c.outer_generations = s.at("outer_generations").get<int>();
  c.search_seed = s.at("search_seed").get<std::uint64_t>();
  c.oracle_seed = s.at("oracle_seed").get<std::uint64_t>();
  c.checkpoint_interval = s.at("checkpoint_interval").get<int>();
  c.concurrency = s.at("concurrency").get<int>();
  const auto& r = j.at("ranges");
  c.ranges.min_blocks = r.at("min_blocks").get<int>();
  c.ranges.max_blocks = r.at("max_blocks").get<int>();
  c.ranges.layers = range_from(r.at("layers"));
  c.ranges.growth = range_from(r.at("growth"));
  c.ranges.input_channels = r.at("input_channels").get<int>();
  c.ranges.input_height = r.at("input_height").get<int>();
  c.ranges.input_width = r.at("input_width").get<int>();
  const auto& p = j.at("pso");
  c.pso = {p.at("w").get<double>(), p.at("c1").get<double>(), p.at("c2").get<double>(), p.at("r_cb").get<double>()};
  const auto& g = j.at("ga");
  c.ga.mutation_rate = g.at("mutation_rate").get<double>();
  c.ga.crossover_rate = g.at("crossover_rate").get<double>();
  c.ga.elitism_rate = g.at("elitism_rate").get<double>();
  c.ga.population_size = g.at("population_size").get<int>();
  c.ga.generations = g.at("generations").get<int>();
  c.ga.tournament_size = g.at("tournament_size").get<int>();
  const auto& e = j.at("evaluator");
  c.evaluator.kind = evaluator_kind_from_string(e.at("kind").get<std::string>());
  c.evaluator.epochs = e.at("epochs").get<int>();
  c.evaluator.lr_candidates = e.at("lr_candidates").get<std::vector<double>>();
  c.evaluator.second_level_fraction = e.at("second_level_fraction").get<double>();
  c.evaluator.num_classes = e.at("num_classes").get<int>();
  c.evaluator.cache = optional_from<bool>(e, "cache");
  const auto& su = e.at("surrogate");
  c.evaluator.surrogate.target_blocks = optional_from<int>(su, "target_blocks");
  c.evaluator.surrogate.preferred_lr = optional_from<double>(su, "preferred_lr");
  c.evaluator.surrogate.lr_choices = su.at("lr_choices").get<std::vector<double>>();
  const auto& tr = e.at("trainer");
  c.evaluator.trainer.address = tr.at("address").get<std::string>();
  c.evaluator.trainer.timeout_seconds = tr.at("timeout_seconds").get<double>();
  const auto& ds = tr.at("dataset");
  c.evaluator.trainer.dataset = {ds.at("name").get<std::string>(), ds.at("path").get<std::string>(),
                                 ds.at("num_classes").get<int>()};
  return c;
}

ojson gbest_json(const std::optional<GlobalBest>& g) {
  if (!g) return nullptr;
  ojson j;
  j["position"] = g->position;
  j["genome"] = genome_json(g->arch, g->conn);
  j["record"] = record_json(g->record);
  return j;
}

std::optional<GlobalBest> gbest_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  GlobalBest g;
  g.position = j.at("position").get<std::vector<double>>();
  std::tie(g.arch, g.conn) = genome_from_json(j.at("genome").dump());
  g.record = record_from(j.at("record"));
  return g;
}

ojson history_json(const std::vector<GenerationRecord>& history) {
  auto arr = ojson::array();
  for (const auto& h : history) {
    ojson j;
    j["generation"] = h.generation;
    j["best_fitness"] = h.best_fitness;
    j["mean_fitness"] = h.mean_fitness;
    j["evaluations"] = h.evaluations;
    auto pop = ojson::array();
    for (const auto& p : h.population) {
      ojson pj = genome_json(p.arch, p.conn);
      pj["fitness"] = p.fitness;
      pop.push_back(std::move(pj));
    }
    j["population"] = std::move(pop);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<GenerationRecord> history_from(const nlohmann::json& arr) {
  std::vector<GenerationRecord> out;
  for (const auto& j : arr) {
    GenerationRecord h;
    h.generation = j.at("generation").get<int>();
    h.best_fitness = j.at("best_fitness").get<double>();
    h.mean_fitness = j.at("mean_fitness").get<double>();
    h.evaluations = j.at("evaluations").get<std::uint64_t>();
    for (const auto& pj : j.at("population")) {
      ParticleSnapshot p;
      std::tie(p.arch, p.conn) = genome_from_json(pj.dump());
      p.fitness = pj.at("fitness").get<double>();
      h.population.push_back(std::move(p));
    }
    out.push_back(std::move(h));
  }
  return out;
}

ojson state_json(const SearchState& s) {
  ojson j;
  j["config"] = config_json(s.config);
  j["generation"] = s.generation;
  j["evaluation_count"] = s.evaluation_count;
  auto particles = ojson::array();
  for (const auto& p : s.particles) {
    ojson pj;
    pj["position"] = p.position;
    pj["velocity"] = p.velocity;
    if (p.personal_best) {
      const auto& pb = *p.personal_best;
      pj["personal_best"] = {{"position", pb.position},
                             {"conn_bits", pb.conn.to_string()},
                             {"record", record_json(pb.record)}};
    } else {
      pj["personal_best"] = nullptr;
    }
    particles.push_back(std::move(pj));
  }
  j["particles"] = std::move(particles);
  j["global_best"] = gbest_json(s.global_best);
  j["history"] = history_json(s.history);
  return j;
}

SearchState state_from(const nlohmann::json& j) {
  SearchState s;
  s.config = config_from(j.at("config"));
  s.generation = j.at("generation").get<int>();
  s.evaluation_count = j.at("evaluation_count").get<std::uint64_t>();
  for (const auto& pj : j.at("particles")) {
    Particle p;
    p.position = pj.at("position").get<std::vector<double>>();
    p.velocity = pj.at("velocity").get<std::vector<double>>();
    if (const auto& pb = pj.at("personal_best"); !pb.is_null()) {
      PersonalBest best;
      best.position = pb.at("position").get<std::vector<double>>();
      // The winning connections were laid out for the decoded best position.
      best.conn = ConnGenome::from_string(decode_position(best.position, s.config.ranges),
                                          pb.at("conn_bits").get<std::string>());
      best.record = record_from(pb.at("record"));
      p.personal_best = std::move(best);
    }
    s.particles.push_back(std::move(p));
  }
  s.global_best = gbest_from(j.at("global_best"));
  s.history = history_from(j.at("history"));
  return s;
}

std::string crc_hex(const std::string& data) {
  const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace

std::string config_to_json(const SearchConfig& config) { return config_json(config).dump(2); }

SearchConfig config_from_json(const std::string& text) {
  try {
    return config_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
}

std::string result_to_json(const SearchResult& result) {
  ojson j;
  j["global_best"] = gbest_json(result.global_best);
  j["evaluation_count"] = result.evaluation_count;
  j["history"] = history_json(result.history);
  return j.dump();
}

std::string checkpoint(const SearchState& state) {
  const std::string payload = state_json(state).dump();
  ojson j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["crc32"] = crc_hex(payload);
  // Embedded as text so the checksum covers exactly the stored bytes.
  j["state"] = payload;
  return j.dump() + "\n";
}

SearchState resume(const std::string& bytes) {
  nlohmann::json outer;
  try {
    outer = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error&) {
    throw CheckpointError("checkpoint is corrupted: not JSON");
  }
  if (!outer.is_object() || outer.value("format", "") != kCheckpointFormat)
    throw CheckpointError("checkpoint is corrupted: unknown format");
  if (!outer.contains("version") || !outer["version"].is_number_integer())
    throw CheckpointError("checkpoint is corrupted: missing version");
  if (const int v = outer["version"].get<int>(); v != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(v) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  if (!outer.contains("state") || !outer["state"].is_string() || !outer.contains("crc32") || !outer["crc32"].is_string())
    throw CheckpointError("checkpoint is corrupted: missing payload");
  const std::string payload = outer["state"].get<std::string>();
  if (crc_hex(payload) != outer["crc32"].get<std::string>()) throw CheckpointError("checkpoint is corrupted: checksum mismatch");
  try {
    SearchState s = state_from(nlohmann::json::parse(payload));
    s.config.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint is corrupted: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("checkpoint is corrupted: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint is corrupted: ") + e.what());
  }
}

}  // namespace hgapso
