#include "hgapso/genome.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <nlohmann/json.hpp>

#include "hgapso/error.hpp"

namespace hgapso {

namespace {

int round_half_away(double v) {
  // std::round already rounds halves away from zero.
  const double r = std::round(v);
  if (r > static_cast<double>(std::numeric_limits<int>::max())) return std::numeric_limits<int>::max();
  if (r < static_cast<double>(std::numeric_limits<int>::min())) return std::numeric_limits<int>::min();
  return static_cast<int>(r);
}

std::vector<ConnGenome::Segment> layout_for(const ArchGenome& arch) {
  std::vector<ConnGenome::Segment> segs;
  segs.reserve(arch.blocks.size());
  std::size_t offset = 0;
  for (const auto& b : arch.blocks) {
    const std::size_t len = conn_segment_length(b.num_layers);
    segs.push_back({offset, len, b.num_layers});
    offset += len;
  }
  return segs;
}

}  // namespace

int SearchRanges::spatial_block_limit() const {
  const int side = std::min(input_height, input_width);
  if (side < 1) return 0;
  return std::bit_width(static_cast<unsigned>(side)) - 1;
}

SearchRanges SearchRanges::for_input(int channels, int height, int width) {
  SearchRanges r;
  r.input_channels = channels;
  r.input_height = height;
  r.input_width = width;
  r.min_blocks = 1;
  r.max_blocks = std::max(1, r.spatial_block_limit() - 1);
  return r;
}

void SearchRanges::validate() const {
  if (input_channels < 1) throw InvalidArgument("input_channels must be positive");
  if (input_height < 1 || input_width < 1) throw InvalidArgument("input spatial size must be positive");
  if (min_blocks < 1) throw InvalidArgument("min_blocks must be >= 1");
  if (min_blocks > max_blocks) throw InvalidArgument("min_blocks must not exceed max_blocks");
  if (layers.lo < 1 || layers.lo > layers.hi) throw InvalidArgument("layers range must be a nonempty positive interval");
  if (growth.lo < 1 || growth.lo > growth.hi) throw InvalidArgument("growth range must be a nonempty positive interval");
  if (max_blocks > spatial_block_limit()) {
    throw InvalidArgument("max_blocks " + std::to_string(max_blocks) + " exceeds floor(log2(min spatial)) = " +
                          std::to_string(spatial_block_limit()));
  }
}

void ArchGenome::validate(const SearchRanges& ranges) const {
  if (blocks.empty()) throw InvalidArgument("architecture has no blocks");
  if (num_blocks() > ranges.max_blocks) throw InvalidArgument("architecture exceeds max_blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!ranges.layers.contains(blocks[i].num_layers))
      throw InvalidArgument("block " + std::to_string(i) + ": layer count out of range");
    if (!ranges.growth.contains(blocks[i].growth_rate))
      throw InvalidArgument("block " + std::to_string(i) + ": growth rate out of range");
  }
}

std::vector<double> ArchGenome::to_position() const {
  std::vector<double> pos;
  pos.reserve(1 + 2 * blocks.size());
  pos.push_back(static_cast<double>(blocks.size()));
  for (const auto& b : blocks) {
    pos.push_back(b.num_layers);
    pos.push_back(b.growth_rate);
  }
  return pos;
}

int arch_dimension(int num_blocks) {
  if (num_blocks < 1) throw InvalidArgument("arch_dimension: num_blocks must be >= 1");
  return 1 + 2 * num_blocks;
}

std::size_t conn_segment_length(int num_layers) {
  if (num_layers < 1) throw InvalidArgument("conn_segment_length: num_layers must be >= 1");
  const auto l = static_cast<std::size_t>(num_layers);
  return l * (l - 1) / 2;
}

std::size_t ConnGenome::pair_offset(int num_layers, int source, int target) {
  if (source < 0 || target < source + 2 || target > num_layers)
    throw InvalidArgument("pair_offset: not a skip edge");
  const auto l = static_cast<std::size_t>(num_layers);
  const auto i = static_cast<std::size_t>(source);
  // Source s owns L - s - 1 slots; sum over s < i.
  const std::size_t before = i * (2 * l - i - 1) / 2;
  return before + static_cast<std::size_t>(target - source - 2);
}

ConnGenome ConnGenome::zeros(const ArchGenome& arch) {
  ConnGenome g;
  g.segments_ = layout_for(arch);
  std::size_t total = 0;
  for (const auto& s : g.segments_) total += s.length;
  g.bits_.assign(total, 0);
  return g;
}

ConnGenome ConnGenome::ones(const ArchGenome& arch) {
  ConnGenome g = zeros(arch);
  std::fill(g.bits_.begin(), g.bits_.end(), 1);
  return g;
}

bool ConnGenome::has_edge(std::size_t block, int source, int target) const {
  const Segment& seg = segments_.at(block);
  if (target == source + 1) return true;
  return bits_[seg.start + pair_offset(seg.num_layers, source, target)] != 0;
}

bool ConnGenome::matches(const ArchGenome& arch) const { return segments_ == layout_for(arch); }

std::string ConnGenome::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

ConnGenome ConnGenome::from_string(const ArchGenome& arch, const std::string& bits) {
  ConnGenome g = zeros(arch);
  if (bits.size() != g.size()) {
    throw InvalidArgument("connection bits: expected " + std::to_string(g.size()) + " bits, got " +
                          std::to_string(bits.size()));
  }
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw InvalidArgument("connection bits: non-binary character");
    g.bits_[i] = bits[i] == '1' ? 1 : 0;
  }
  return g;
}

BlockGene random_block(const SearchRanges& ranges, Rng& rng) {
  BlockGene b;
  b.num_layers = static_cast<int>(rng.uniform_int(ranges.layers.lo, ranges.layers.hi));
  b.growth_rate = static_cast<int>(rng.uniform_int(ranges.growth.lo, ranges.growth.hi));
  return b;
}

ArchGenome random_arch(const SearchRanges& ranges, Rng& rng) {
  ranges.validate();
  ArchGenome g;
  const auto count = rng.uniform_int(ranges.min_blocks, ranges.max_blocks);
  for (std::int64_t i = 0; i < count; ++i) g.blocks.push_back(random_block(ranges, rng));
  return g;
}

ConnGenome random_conn(const ArchGenome& arch, Rng& rng) {
  ConnGenome g = ConnGenome::zeros(arch);
  // One 64-bit draw feeds 64 bits; bits are consumed low to high.
  auto& bits = g.mutable_bits();
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i % 64 == 0) word = rng.next();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return g;
}

int decode_block_count(double value, const SearchRanges& ranges) {
  if (!std::isfinite(value)) throw InvalidArgument("decode_position: non-finite block count");
  return std::clamp(round_half_away(value), ranges.min_blocks, ranges.max_blocks);
}

ArchGenome decode_position(std::span<const double> position, const SearchRanges& ranges) {
  if (position.size() < 3 || position.size() % 2 == 0) {
    throw InvalidArgument("decode_position: dimension count " + std::to_string(position.size()) +
                          " is not of the form 1 + 2B");
  }
  for (double v : position) {
    if (!std::isfinite(v)) throw InvalidArgument("decode_position: non-finite coordinate");
  }
  const int available = static_cast<int>((position.size() - 1) / 2);
  const int count = std::min(decode_block_count(position[0], ranges), available);
  ArchGenome g;
  g.blocks.reserve(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    const auto base = static_cast<std::size_t>(1 + 2 * b);
    g.blocks.push_back({ranges.layers.clamp(round_half_away(position[base])),
                        ranges.growth.clamp(round_half_away(position[base + 1]))});
  }
  return g;
}

std::string genome_to_json(const ArchGenome& arch, const ConnGenome& conn) {
  nlohmann::ordered_json j;
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : arch.blocks) blocks.push_back({b.num_layers, b.growth_rate});
  j["blocks"] = std::move(blocks);
  j["conn_bits"] = conn.to_string();
  return j.dump();
}

std::pair<ArchGenome, ConnGenome> genome_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("genome json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("blocks") || !j.contains("conn_bits"))
    throw InvalidArgument("genome json: expected keys 'blocks' and 'conn_bits'");
  ArchGenome arch;
  try {
    for (const auto& b : j.at("blocks")) {
      if (!b.is_array() || b.size() != 2) throw InvalidArgument("genome json: block must be [layers, growth]");
      arch.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    }
    for (const auto& b : arch.blocks) {
      if (b.num_layers < 1 || b.growth_rate < 1) throw InvalidArgument("genome json: nonpositive block value");
    }
    return {arch, ConnGenome::from_string(arch, j.at("conn_bits").get<std::string>())};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("genome json: ") + e.what());
  }
}

}  // namespace hgapso
