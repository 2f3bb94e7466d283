#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hgapso/genome.hpp"

namespace hgapso {

enum class NodeKind { kInput, kConvUnit, kTransition, kGlobalPool, kClassifier };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view name);

struct Spatial {
  int height = 0;
  int width = 0;
  friend bool operator==(const Spatial&, const Spatial&) = default;
};

/// conv_unit: BN -> ReLU -> 3x3 conv, stride 1, `out_channels` = growth rate.
/// transition: 3x3 conv, stride 1, to floor(in / 2) channels, then 2x2 pool stride 2.
/// global_pool: average over the spatial extent. classifier: linear head.
struct GraphNode {
  int id = 0;
  NodeKind kind = NodeKind::kInput;
  int out_channels = 0;
  Spatial spatial;
  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
  int source = 0;
  int target = 0;
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct InputShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// Explicit DAG of a DynamicNet-style CNN. Incoming edges of a node are
/// concatenated along the channel axis. Node ids equal their list index and
/// edges always point from a lower id to a higher one.
struct NetworkGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  InputShape input_shape;
  int num_classes = 0;

  /// Sum of out_channels over incoming edges.
  int input_channels(int node_id) const;
  std::vector<int> predecessors(int node_id) const;
  /// Input channel count of every conv_unit, in node order.
  std::vector<int> conv_input_channels() const;
  std::size_t count(NodeKind kind) const;

  /// Structural checks: ids, edge direction, transition and conv arithmetic.
  void validate() const;

  friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;
};

/// Expands the genome pair into a graph. The block input of the first block
/// is the network input; later blocks start at the preceding transition.
/// Skips only target conv units, so a block's output is its last conv unit.
NetworkGraph build_graph(const ArchGenome& arch, const ConnGenome& conn, InputShape input_shape,
                         int num_classes);

/// Conv, BN and classifier parameters; see the README for the formula.
std::uint64_t param_count(const NetworkGraph& graph);

enum class ExportFormat { kDot, kCanonical };

ExportFormat export_format_from_string(std::string_view name);
std::string export_graph(const NetworkGraph& graph, ExportFormat format);
/// Inverse of export_graph(..., kCanonical).
NetworkGraph parse_graph(const std::string& canonical_text);

}  // namespace hgapso
