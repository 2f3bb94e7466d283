#include "hgapso/netgraph.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hgapso/error.hpp"

namespace hgapso {

using ojson = nlohmann::ordered_json;

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kInput: return "input";
    case NodeKind::kConvUnit: return "conv_unit";
    case NodeKind::kTransition: return "transition";
    case NodeKind::kGlobalPool: return "global_pool";
    case NodeKind::kClassifier: return "classifier";
  }
  return "unknown";
}

NodeKind node_kind_from_string(std::string_view name) {
  for (auto k : {NodeKind::kInput, NodeKind::kConvUnit, NodeKind::kTransition, NodeKind::kGlobalPool,
                 NodeKind::kClassifier}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown node kind '" + std::string(name) + "'");
}

int NetworkGraph::input_channels(int node_id) const {
  int total = 0;
  for (const auto& e : edges) {
    if (e.target == node_id) total += nodes.at(static_cast<std::size_t>(e.source)).out_channels;
  }
  return total;
}

std::vector<int> NetworkGraph::predecessors(int node_id) const {
  std::vector<int> out;
  for (const auto& e : edges) {
    if (e.target == node_id) out.push_back(e.source);
  }
  return out;
}

std::vector<int> NetworkGraph::conv_input_channels() const {
  std::vector<int> out;
  for (const auto& n : nodes) {
    if (n.kind == NodeKind::kConvUnit) out.push_back(input_channels(n.id));
  }
  return out;
}

std::size_t NetworkGraph::count(NodeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [kind](const GraphNode& n) { return n.kind == kind; }));
}

void NetworkGraph::validate() const {
  if (nodes.empty() || nodes.front().kind != NodeKind::kInput) throw InvalidArgument("graph: first node must be the input");
  if (nodes.front().out_channels != input_shape.channels) throw InvalidArgument("graph: input channel mismatch");
  if (num_classes < 1) throw InvalidArgument("graph: num_classes must be positive");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.id != static_cast<int>(i)) throw InvalidArgument("graph: node ids must equal their position");
    if (n.out_channels < 1) throw InvalidArgument("graph: node " + std::to_string(n.id) + " has no output channels");
    if (n.spatial.height < 1 || n.spatial.width < 1) throw InvalidArgument("graph: node " + std::to_string(n.id) + " has empty spatial size");
  }
  for (const auto& e : edges) {
    if (e.source < 0 || e.target >= static_cast<int>(nodes.size()) || e.source >= e.target)
      throw InvalidArgument("graph: edge " + std::to_string(e.source) + "->" + std::to_string(e.target) + " is not forward");
  }
  for (const auto& n : nodes) {
    if (n.kind == NodeKind::kInput) {
      if (n.id != 0) throw InvalidArgument("graph: extra input node");
      continue;
    }
    const int in = input_channels(n.id);
    if (in < 1) throw InvalidArgument("graph: node " + std::to_string(n.id) + " has no inputs");
    if (n.kind == NodeKind::kTransition && n.out_channels != in / 2)
      throw InvalidArgument("graph: transition " + std::to_string(n.id) + " must halve its channels");
    if ((n.kind == NodeKind::kGlobalPool) && n.out_channels != in)
      throw InvalidArgument("graph: global_pool must preserve channels");
    if (n.kind == NodeKind::kClassifier && n.out_channels != num_classes)
      throw InvalidArgument("graph: classifier width must equal num_classes");
  }
}

NetworkGraph build_graph(const ArchGenome& arch, const ConnGenome& conn, InputShape input_shape, int num_classes) {
  if (arch.blocks.empty()) throw InvalidArgument("build_graph: zero blocks");
  if (!conn.matches(arch)) {
    throw InvalidArgument("build_graph: connection genome has " + std::to_string(conn.size()) +
                          " bits, architecture needs a different layout");
  }
  if (input_shape.channels < 1 || input_shape.height < 1 || input_shape.width < 1)
    throw InvalidArgument("build_graph: invalid input shape");
  if (num_classes < 1) throw InvalidArgument("build_graph: num_classes must be positive");

  NetworkGraph g;
  g.input_shape = input_shape;
  g.num_classes = num_classes;
  Spatial spatial{input_shape.height, input_shape.width};
  g.nodes.push_back({0, NodeKind::kInput, input_shape.channels, spatial});

  auto add_node = [&g](NodeKind kind, int channels, Spatial s) {
    const int id = static_cast<int>(g.nodes.size());
    g.nodes.push_back({id, kind, channels, s});
    return id;
  };

  int block_input = 0;
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const auto& block = arch.blocks[b];
    if (block.num_layers < 1 || block.growth_rate < 1) throw InvalidArgument("build_graph: nonpositive block value");
    // local node index -> graph id; local 0 is the block input.
    std::vector<int> local{block_input};
    for (int j = 1; j <= block.num_layers; ++j) {
      const int id = add_node(NodeKind::kConvUnit, block.growth_rate, spatial);
      for (int i = 0; i < j; ++i) {
        if (conn.has_edge(b, i, j)) g.edges.push_back({local[static_cast<std::size_t>(i)], id});
      }
      local.push_back(id);
    }
    const int block_output = local.back();
    if (b + 1 < arch.blocks.size()) {
      if (spatial.height < 2 || spatial.width < 2)
        throw InvalidArgument("build_graph: spatial underflow before transition " + std::to_string(b));
      const int channels = block.growth_rate / 2;
      if (channels < 1) throw InvalidArgument("build_graph: transition after block " + std::to_string(b) + " has zero channels");
      spatial = {spatial.height / 2, spatial.width / 2};
      block_input = add_node(NodeKind::kTransition, channels, spatial);
      g.edges.push_back({block_output, block_input});
    } else {
      const int pool = add_node(NodeKind::kGlobalPool, block.growth_rate, {1, 1});
      g.edges.push_back({block_output, pool});
      const int head = add_node(NodeKind::kClassifier, num_classes, {1, 1});
      g.edges.push_back({pool, head});
    }
  }
  return g;
}

std::uint64_t param_count(const NetworkGraph& graph) {
  std::uint64_t total = 0;
  for (const auto& n : graph.nodes) {
    const auto in = static_cast<std::uint64_t>(graph.input_channels(n.id));
    const auto out = static_cast<std::uint64_t>(n.out_channels);
    switch (n.kind) {
      case NodeKind::kConvUnit:
        total += in * out * 9 + out + 2 * in;
        break;
      case NodeKind::kTransition:
        total += in * out * 9 + out;
        break;
      case NodeKind::kClassifier:
        total += in * out + out;
        break;
      case NodeKind::kInput:
      case NodeKind::kGlobalPool:
        break;
    }
  }
  return total;
}

ExportFormat export_format_from_string(std::string_view name) {
  if (name == "dot") return ExportFormat::kDot;
  if (name == "canonical" || name == "canonical-text" || name == "json") return ExportFormat::kCanonical;
  throw InvalidArgument("unknown export format '" + std::string(name) + "'");
}

namespace {

std::string to_dot(const NetworkGraph& g) {
  std::ostringstream os;
  os << "digraph dynamicnet {\n  rankdir=TB;\n  node [shape=box];\n";
  for (const auto& n : g.nodes) {
    os << "  n" << n.id << " [label=\"" << n.id << ": " << to_string(n.kind) << "\\n" << n.out_channels << " ch, "
       << n.spatial.height << "x" << n.spatial.width << "\"];\n";
  }
  for (const auto& e : g.edges) os << "  n" << e.source << " -> n" << e.target << ";\n";
  os << "}\n";
  return os.str();
}

std::string to_canonical(const NetworkGraph& g) {
  ojson j;
  auto nodes = ojson::array();
  for (const auto& n : g.nodes) {
    ojson node;
    node["id"] = n.id;
    node["kind"] = std::string(to_string(n.kind));
    node["out_channels"] = n.out_channels;
    node["spatial"] = {n.spatial.height, n.spatial.width};
    nodes.push_back(std::move(node));
  }
  auto edges = ojson::array();
  for (const auto& e : g.edges) edges.push_back({e.source, e.target});
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  j["input_shape"] = {g.input_shape.channels, g.input_shape.height, g.input_shape.width};
  j["num_classes"] = g.num_classes;
  return j.dump();
}

}  // namespace

std::string export_graph(const NetworkGraph& graph, ExportFormat format) {
  return format == ExportFormat::kDot ? to_dot(graph) : to_canonical(graph);
}

NetworkGraph parse_graph(const std::string& canonical_text) {
  NetworkGraph g;
  try {
    const auto j = nlohmann::json::parse(canonical_text);
    for (const auto& n : j.at("nodes")) {
      const auto& sp = n.at("spatial");
      g.nodes.push_back({n.at("id").get<int>(), node_kind_from_string(n.at("kind").get<std::string>()),
                         n.at("out_channels").get<int>(), {sp.at(0).get<int>(), sp.at(1).get<int>()}});
    }
    for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    const auto& shape = j.at("input_shape");
    g.input_shape = {shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
    g.num_classes = j.at("num_classes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("graph text: ") + e.what());
  }
  g.validate();
  return g;
}

}  // namespace hgapso
