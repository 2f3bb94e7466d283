#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hgapso/config.hpp"
#include "hgapso/error.hpp"
#include "hgapso/netgraph.hpp"
#include "hgapso/search.hpp"

namespace hgapso::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

volatile std::sig_atomic_t g_interrupted = 0;
extern "C" void on_interrupt(int) { g_interrupted = 1; }

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("HGAPSO_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v = env;
  if (v == "quiet" || v == "error" || v == "0") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << bytes;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Flags shared by commands that build an evaluator.
struct EvaluatorFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> evaluator;
  std::optional<std::string> trainer_endpoint;
  std::vector<std::string> overrides;

  void add_to(CLI::App& app, bool config_required) {
    auto* opt = app.add_option("--config", config_path, "TOML search config");
    if (config_required) opt->required();
    app.add_option("--seed", seed, "Search seed");
    app.add_option("--evaluator", evaluator, "surrogate or trainer")->check(CLI::IsMember({"surrogate", "trainer"}));
    app.add_option("--trainer-endpoint", trainer_endpoint, "host:port or stdio:<command>");
    app.add_option("--set", overrides, "Override a config key, e.g. --set ga.mutation_rate=0.02");
  }

  SearchConfig load() const {
    SearchConfig cfg = config_path.empty() ? SearchConfig{} : load_config_file(config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (seed) cfg.search_seed = *seed;
    if (evaluator) cfg.evaluator.kind = evaluator_kind_from_string(*evaluator);
    if (trainer_endpoint) cfg.evaluator.trainer.address = *trainer_endpoint;
    return cfg;
  }
};

std::string report_line(const GenerationRecord& rec, double wall_time) {
  nlohmann::ordered_json j;
  j["generation"] = rec.generation;
  j["best_fitness"] = rec.best_fitness;
  j["mean_fitness"] = rec.mean_fitness;
  j["evaluations"] = rec.evaluations;
  j["wall_time"] = wall_time;
  return j.dump();
}

// --- search ------------------------------------------------------------------

struct SearchFlags {
  EvaluatorFlags eval;
  std::optional<int> outer_generations;
  std::optional<int> concurrency;
  std::string checkpoint_dir = "hgapso-run";
  std::string resume_path;
};

int cmd_search(const SearchFlags& flags, std::ostream& out, std::ostream& err) {
  const auto started = utc_now();
  const LogLevel level = log_level();

  std::optional<SearchState> state;
  if (!flags.resume_path.empty()) {
    state = resume(read_file(flags.resume_path));
    if (flags.outer_generations) state->config.outer_generations = *flags.outer_generations;
    if (flags.concurrency) state->config.concurrency = *flags.concurrency;
    if (flags.eval.trainer_endpoint) state->config.evaluator.trainer.address = *flags.eval.trainer_endpoint;
    state->config.validate();
  } else {
    SearchConfig cfg = flags.eval.load();
    if (flags.outer_generations) cfg.outer_generations = *flags.outer_generations;
    if (flags.concurrency) cfg.concurrency = *flags.concurrency;
    cfg.validate();
    state = initial_state(cfg);
  }
  const SearchConfig& cfg = state->config;

  const fs::path dir(flags.checkpoint_dir);
  fs::create_directories(dir);
  const fs::path report_path = dir / "report.jsonl";
  const fs::path checkpoint_path = dir / "checkpoint.json";
  std::ofstream report(report_path, flags.resume_path.empty() ? std::ios::trunc : std::ios::app);
  if (!report) throw Error("cannot write '" + report_path.string() + "'");

  auto evaluator = make_evaluator(cfg);
  Search search(std::move(*state), *evaluator);

  nlohmann::ordered_json artifacts;
  artifacts["report"] = report_path.string();
  auto write_checkpoint = [&] {
    write_file(checkpoint_path, checkpoint(search.state()));
    artifacts["checkpoint"] = checkpoint_path.string();
  };
  auto write_manifest = [&](const std::string& status) {
    nlohmann::ordered_json m;
    m["tool_version"] = kToolVersion;
    m["status"] = status;
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["config"] = nlohmann::ordered_json::parse(config_to_json(cfg));
    m["artifacts"] = artifacts;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
  };

  g_interrupted = 0;
  auto previous = std::signal(SIGINT, on_interrupt);
  int status = 0;
  while (!search.done()) {
    if (g_interrupted) {
      write_checkpoint();
      write_manifest("interrupted");
      err << "interrupted; checkpoint written to " << checkpoint_path.string() << "\n";
      status = 130;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const GenerationRecord& rec = search.step();
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report << report_line(rec, wall) << "\n" << std::flush;
      if (level >= LogLevel::kInfo) {
        err << "generation " << rec.generation << "/" << cfg.outer_generations << " best " << rec.best_fitness
            << " mean " << rec.mean_fitness << " evaluations " << rec.evaluations << "\n";
      }
      if (level >= LogLevel::kDebug) {
        for (std::size_t i = 0; i < rec.population.size(); ++i) {
          const auto& p = rec.population[i];
          err << "  particle " << i << " fitness " << p.fitness << " genome " << genome_to_json(p.arch, p.conn) << "\n";
        }
        err << "  cache hits " << search.cache_hits() << "\n";
      }
      if (cfg.checkpoint_interval > 0 && rec.generation % cfg.checkpoint_interval == 0) write_checkpoint();
    } catch (const Error& e) {
      // The failed generation left the state untouched, so it can be resumed.
      write_checkpoint();
      write_manifest("failed");
      err << "error: " << e.what() << "\nresumable checkpoint: " << checkpoint_path.string() << "\n";
      status = 3;
      break;
    }
  }
  std::signal(SIGINT, previous);
  if (status != 0) return status;

  write_checkpoint();
  const SearchResult result = search.result();
  write_file(dir / "result.json", result_to_json(result) + "\n");
  artifacts["result"] = (dir / "result.json").string();
  if (result.global_best) {
    const auto& best = *result.global_best;
    const NetworkGraph graph = build_graph(best.arch, best.conn,
                                           {cfg.ranges.input_channels, cfg.ranges.input_height, cfg.ranges.input_width},
                                           cfg.evaluator.num_classes);
    write_file(dir / "best_genome.json", genome_to_json(best.arch, best.conn) + "\n");
    write_file(dir / "best_graph.json", export_graph(graph, ExportFormat::kCanonical) + "\n");
    write_file(dir / "best_graph.dot", export_graph(graph, ExportFormat::kDot));
    artifacts["best_genome"] = (dir / "best_genome.json").string();
    artifacts["best_graph"] = (dir / "best_graph.json").string();
    artifacts["best_graph_dot"] = (dir / "best_graph.dot").string();
    out << "best fitness " << best.record.fitness << " genome " << genome_to_json(best.arch, best.conn) << "\n";
  } else {
    out << "no generations run; no best genome\n";
  }
  write_manifest("completed");
  return 0;
}

// --- export ------------------------------------------------------------------

int cmd_export(const std::string& checkpoint_file, const std::string& format_name, const std::string& output,
               std::ostream& out) {
  const ExportFormat format = export_format_from_string(format_name);
  const SearchState state = resume(read_file(checkpoint_file));
  if (!state.global_best) throw Error("checkpoint '" + checkpoint_file + "' has no best genome yet");
  const auto& cfg = state.config;
  const NetworkGraph graph =
      build_graph(state.global_best->arch, state.global_best->conn,
                  {cfg.ranges.input_channels, cfg.ranges.input_height, cfg.ranges.input_width}, cfg.evaluator.num_classes);
  std::string text = export_graph(graph, format);
  if (format == ExportFormat::kCanonical) text += "\n";
  if (output.empty() || output == "-") {
    out << text;
  } else {
    write_file(output, text);
  }
  return 0;
}

// --- report ------------------------------------------------------------------

int cmd_report(const std::string& log_path, std::ostream& out, std::ostream& err) {
  std::ifstream in(log_path);
  if (!in) throw Error("cannot read '" + log_path + "'");
  struct Row {
    int generation;
    double best, mean, wall;
    std::uint64_t evaluations;
  };
  std::vector<Row> rows;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      rows.push_back({j.at("generation").get<int>(), j.at("best_fitness").get<double>(),
                      j.at("mean_fitness").get<double>(), j.at("wall_time").get<double>(),
                      j.at("evaluations").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
      err << log_path << ": line " << number << ": malformed report entry (" << e.what() << ")\n";
      return 2;
    }
  }
  out << std::left << std::setw(12) << "generation" << std::setw(12) << "best" << std::setw(12) << "mean"
      << std::setw(14) << "evaluations" << "wall_time\n";
  double total_wall = 0.0;
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.generation << std::setw(12) << std::fixed << std::setprecision(6) << r.best
        << std::setw(12) << r.mean << std::setw(14) << r.evaluations << std::setprecision(3) << r.wall << "\n";
    total_wall += r.wall;
  }
  out.unsetf(std::ios::floatfield);
  if (!rows.empty()) {
    out << "generations: " << rows.size() << "  final best: " << std::fixed << std::setprecision(6) << rows.back().best
        << "  evaluations: " << rows.back().evaluations << "  wall time: " << std::setprecision(3) << std::fixed
        << total_wall << "s\n";
    out.unsetf(std::ios::floatfield);
  }
  return 0;
}

// --- probe-lr ----------------------------------------------------------------

int cmd_probe(const EvaluatorFlags& flags, const std::string& genome_text, std::ostream& out) {
  SearchConfig cfg = flags.load();
  cfg.validate();
  // Only the block list matters; conn_bits may be empty.
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(genome_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("genome: ") + e.what());
  }
  ArchGenome arch;
  if (!j.is_object() || !j.contains("blocks")) throw InvalidArgument("genome: expected an object with 'blocks'");
  for (const auto& b : j.at("blocks")) arch.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
  arch.validate(cfg.ranges);
  auto evaluator = make_evaluator(cfg);
  const auto probe = probe_learning_rate(arch, cfg.evaluator.lr_candidates,
                                         cfg.budget(cfg.evaluator.second_level_fraction), *evaluator, "cli-probe");
  for (std::size_t i = 0; i < probe.records.size(); ++i) {
    out << "lr " << cfg.evaluator.lr_candidates[i] << " fitness " << probe.records[i].fitness << "\n";
  }
  out << "chosen_lr " << probe.learning_rate << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-level evolutionary search over DynamicNet architectures and skip connections", "hgapso"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SearchFlags search_flags;
  auto* search = app.add_subcommand("search", "Run a search from a config file");
  search_flags.eval.add_to(*search, false);
  search->add_option("--outer-generations", search_flags.outer_generations, "Outer (PSO) generations");
  search->add_option("--concurrency", search_flags.concurrency, "Inner evolutions run at once");
  search->add_option("--checkpoint-dir", search_flags.checkpoint_dir, "Output directory")->capture_default_str();
  search->add_option("--resume", search_flags.resume_path, "Continue from a checkpoint file");

  std::string export_checkpoint, export_format = "canonical", export_output;
  auto* exp = app.add_subcommand("export", "Export the best network of a checkpoint");
  exp->add_option("checkpoint", export_checkpoint, "Checkpoint file")->required();
  exp->add_option("--format", export_format, "dot or canonical")->capture_default_str();
  exp->add_option("-o,--output", export_output, "Output file (default: stdout)");

  std::string report_log;
  auto* rep = app.add_subcommand("report", "Summarize a per-generation report log");
  rep->add_option("log", report_log, "report.jsonl")->required();

  EvaluatorFlags probe_flags;
  std::string probe_genome;
  auto* probe = app.add_subcommand("probe-lr", "Run only the learning-rate probe for one architecture");
  probe_flags.add_to(*probe, false);
  probe->add_option("--genome", probe_genome, R"(Genome JSON, e.g. {"blocks":[[4,8]],"conn_bits":""})")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (search->parsed()) {
      if (!search_flags.eval.config_path.empty() && !fs::exists(search_flags.eval.config_path))
        throw ConfigError("config file '" + search_flags.eval.config_path + "' does not exist");
      return cmd_search(search_flags, out, err);
    }
    if (exp->parsed()) return cmd_export(export_checkpoint, export_format, export_output, out);
    if (rep->parsed()) return cmd_report(report_log, out, err);
    if (probe->parsed()) return cmd_probe(probe_flags, probe_genome, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace hgapso::cli
