#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "hgapso/config.hpp"
#include "hgapso/error.hpp"
#include "hgapso/search.hpp"

namespace py = pybind11;
using namespace hgapso;

namespace {

InputShape input_of(const SearchConfig& c) {
  return {c.ranges.input_channels, c.ranges.input_height, c.ranges.input_width};
}

NetworkGraph graph_of(const std::string& genome, const SearchConfig& c) {
  const auto [arch, conn] = genome_from_json(genome);
  return build_graph(arch, conn, input_of(c), c.evaluator.num_classes);
}

/// Owns the evaluator a Search refers to.
class PySearch {
 public:
  explicit PySearch(SearchState state)
      : evaluator_(make_evaluator(state.config)), search_(std::make_unique<Search>(std::move(state), *evaluator_)) {}

  bool done() const { return search_->done(); }
  int generation() const { return search_->state().generation; }
  std::string step() {
    const GenerationRecord& rec = search_->step();
    SearchResult one{std::nullopt, {rec}, rec.evaluations};
    return result_to_json(one);
  }
  void run() {
    py::gil_scoped_release release;
    search_->run();
  }
  std::string result() const { return result_to_json(search_->result()); }
  py::bytes checkpoint_bytes() const { return py::bytes(checkpoint(search_->state())); }

 private:
  std::unique_ptr<Evaluator> evaluator_;
  std::unique_ptr<Search> search_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-level architecture and connection search (native core)";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  py::class_<SearchConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_toml", [](const std::string& text) { return load_config_toml(text); })
      .def_static("from_file", &load_config_file)
      .def_static("from_json", &config_from_json)
      .def("to_json", &config_to_json)
      .def("set", [](SearchConfig& c, const std::string& assignment) { apply_override(c, assignment); })
      .def("validate", &SearchConfig::validate)
      .def_readwrite("search_seed", &SearchConfig::search_seed)
      .def_readwrite("oracle_seed", &SearchConfig::oracle_seed)
      .def_readwrite("outer_population", &SearchConfig::outer_population)
      .def_readwrite("outer_generations", &SearchConfig::outer_generations)
      .def_readwrite("concurrency", &SearchConfig::concurrency)
      .def("__eq__", [](const SearchConfig& a, const SearchConfig& b) { return a == b; });

  py::class_<PySearch>(m, "Search")
      .def(py::init([](const SearchConfig& c) { return PySearch(initial_state(c)); }))
      .def_static("resume", [](const py::bytes& data) { return PySearch(resume(std::string(data))); })
      .def_property_readonly("done", &PySearch::done)
      .def_property_readonly("generation", &PySearch::generation)
      .def("_step", &PySearch::step)
      .def("run", &PySearch::run)
      .def("_result", &PySearch::result)
      .def("checkpoint", &PySearch::checkpoint_bytes);

  m.def(
      "_run_search",
      [](const SearchConfig& c) {
        py::gil_scoped_release release;
        return result_to_json(run_search(c));
      },
      py::arg("config"));

  m.def("arch_dimension", &arch_dimension, py::arg("num_blocks"));
  m.def("conn_segment_length", &conn_segment_length, py::arg("num_layers"));

  m.def(
      "decode_position",
      [](const std::vector<double>& x, const SearchConfig& c) {
        const auto arch = decode_position(x, c.ranges);
        std::vector<std::pair<int, int>> out;
        for (const auto& b : arch.blocks) out.emplace_back(b.num_layers, b.growth_rate);
        return out;
      },
      py::arg("position"), py::arg("config"));

  m.def(
      "export_genome",
      [](const std::string& genome, const std::string& format, const SearchConfig& c) {
        return export_graph(graph_of(genome, c), export_format_from_string(format));
      },
      py::arg("genome"), py::arg("format"), py::arg("config"));

  m.def(
      "param_count", [](const std::string& genome, const SearchConfig& c) { return param_count(graph_of(genome, c)); },
      py::arg("genome"), py::arg("config"));

  m.def(
      "conv_input_channels",
      [](const std::string& genome, const SearchConfig& c) { return graph_of(genome, c).conv_input_channels(); },
      py::arg("genome"), py::arg("config"));

  m.def(
      "surrogate_fitness",
      [](const std::string& genome, double lr, const SearchConfig& c) {
        SurrogateConfig sc = c.evaluator.surrogate;
        sc.oracle_seed = c.oracle_seed;
        const SurrogateEvaluator s(sc, c.ranges);
        const auto [arch, conn] = genome_from_json(genome);
        return s.fitness(arch, conn, lr);
      },
      py::arg("genome"), py::arg("lr"), py::arg("config"));

  m.def(
      "probe_lr",
      [](const std::string& genome, const SearchConfig& c) {
        auto evaluator = make_evaluator(c);
        const auto arch = genome_from_json(genome).first;
        const auto res = probe_learning_rate(arch, c.evaluator.lr_candidates,
                                             c.budget(c.evaluator.second_level_fraction), *evaluator, "probe");
        std::vector<double> fitness;
        for (const auto& r : res.records) fitness.push_back(r.fitness);
        return py::make_tuple(res.learning_rate, fitness);
      },
      py::arg("genome"), py::arg("config"));
}
