#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgapso/rng.hpp"

namespace hgapso {

struct IntRange {
  int lo = 0;
  int hi = 0;

  bool contains(int v) const { return v >= lo && v <= hi; }
  int clamp(int v) const { return v < lo ? lo : (v > hi ? hi : v); }
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

/// Bounds of the first-level search space plus the input the networks see.
struct SearchRanges {
  int min_blocks = 1;
  int max_blocks = 3;
  IntRange layers{4, 8};
  IntRange growth{8, 32};
  int input_height = 28;
  int input_width = 28;
  int input_channels = 1;

  /// floor(log2(min(height, width))): no more blocks than halvings available.
  int spatial_block_limit() const;

  /// Ranges for the given input with max_blocks = spatial_block_limit() - 1.
  static SearchRanges for_input(int channels, int height, int width);

  /// Throws InvalidArgument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const SearchRanges&, const SearchRanges&) = default;
};

struct BlockGene {
  int num_layers = 0;
  int growth_rate = 0;

  friend bool operator==(const BlockGene&, const BlockGene&) = default;
};

/// First-level genome: the block list of a network.
struct ArchGenome {
  std::vector<BlockGene> blocks;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  void validate(const SearchRanges& ranges) const;

  /// [B, L_1, k_1, ..., L_B, k_B] as reals.
  std::vector<double> to_position() const;

  friend bool operator==(const ArchGenome&, const ArchGenome&) = default;
};

/// Second-level genome: one bit per permitted skip edge, block after block.
///
/// Within a block of L conv units the nodes are 0 (block input) and 1..L.
/// A bit exists for each (source i, target j) with j >= i + 2, ordered by
/// source ascending then target ascending. Adjacent nodes are always wired.
class ConnGenome {
 public:
  struct Segment {
    std::size_t start = 0;
    std::size_t length = 0;
    int num_layers = 0;
    friend bool operator==(const Segment&, const Segment&) = default;
  };

  ConnGenome() = default;

  /// All-zero genome with the layout implied by `arch`.
  static ConnGenome zeros(const ArchGenome& arch);
  static ConnGenome ones(const ArchGenome& arch);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<std::uint8_t>& mutable_bits() { return bits_; }
  const std::vector<Segment>& segments() const { return segments_; }

  bool bit(std::size_t index) const { return bits_[index] != 0; }
  void set(std::size_t index, bool value) { bits_[index] = value ? 1 : 0; }

  /// Whether the skip edge (source -> target) of block `block` is active.
  /// Adjacent edges (target == source + 1) always report true.
  bool has_edge(std::size_t block, int source, int target) const;

  /// Position of (source, target) inside a block segment of `num_layers`.
  static std::size_t pair_offset(int num_layers, int source, int target);

  /// True when the segment layout matches `arch` block for block.
  bool matches(const ArchGenome& arch) const;

  std::string to_string() const;
  /// Parses a "0101..." string with the layout implied by `arch`.
  static ConnGenome from_string(const ArchGenome& arch, const std::string& bits);

  friend bool operator==(const ConnGenome&, const ConnGenome&) = default;

 private:
  std::vector<std::uint8_t> bits_;
  std::vector<Segment> segments_;
};

/// 1 + 2 * num_blocks.
int arch_dimension(int num_blocks);

/// L * (L - 1) / 2 skip slots for an L-layer block.
std::size_t conn_segment_length(int num_layers);

ArchGenome random_arch(const SearchRanges& ranges, Rng& rng);
BlockGene random_block(const SearchRanges& ranges, Rng& rng);
ConnGenome random_conn(const ArchGenome& arch, Rng& rng);

/// Round half away from zero, then clamp each dimension into its range.
/// Trailing dimensions beyond the decoded block count are ignored.
ArchGenome decode_position(std::span<const double> position, const SearchRanges& ranges);

/// Decoded block count of a raw dimension-0 value.
int decode_block_count(double value, const SearchRanges& ranges);

/// Canonical genome text: {"blocks":[[L,k],...],"conn_bits":"0101..."}.
std::string genome_to_json(const ArchGenome& arch, const ConnGenome& conn);
std::pair<ArchGenome, ConnGenome> genome_from_json(const std::string& text);

}  // namespace hgapso
