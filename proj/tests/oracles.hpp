#pragma once

// Test-only reference computations. Nothing here calls into the code path it
// is used to check.

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

/// Enumerates skip pairs (i, j), 0 <= i <= L - 2, i + 2 <= j <= L.
inline std::vector<std::pair<int, int>> skip_pairs(int layers) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i <= layers - 2; ++i)
    for (int j = i + 2; j <= layers; ++j) out.emplace_back(i, j);
  return out;
}

/// Counts first-level dimensions by listing them.
inline int count_arch_dims(int blocks) {
  int dims = 1;  // block count
  for (int b = 0; b < blocks; ++b) dims += 2;  // layers, growth
  return dims;
}

struct Block {
  int layers;
  int growth;
};

/// Conv-unit input channels by walking the genome directly: every unit sums
/// the out_channels of its predecessor and of every skip source whose bit is
/// set. Bits are read in (source asc, target asc) order per block.
inline std::vector<int> conv_input_channels(const std::vector<Block>& blocks, const std::vector<std::uint8_t>& bits,
                                            int input_channels) {
  std::vector<int> result;
  std::size_t cursor = 0;
  int block_input = input_channels;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const int L = blocks[b].layers;
    const int k = blocks[b].growth;
    std::map<std::pair<int, int>, bool> active;
    for (auto pr : skip_pairs(L)) active[pr] = bits[cursor++] != 0;
    std::vector<int> out_ch(static_cast<std::size_t>(L) + 1, k);
    out_ch[0] = block_input;
    for (int j = 1; j <= L; ++j) {
      int sum = out_ch[static_cast<std::size_t>(j - 1)];
      for (int i = 0; i + 2 <= j; ++i)
        if (active[{i, j}]) sum += out_ch[static_cast<std::size_t>(i)];
      result.push_back(sum);
    }
    block_input = k / 2;  // transition after this block (if any)
  }
  return result;
}

/// Scalar velocity/position update written out by hand.
inline std::pair<double, double> pso_scalar(double x, double v, double p, double g, double w, double c1, double c2,
                                            double r1, double r2) {
  const double inertia = w * v;
  const double cognitive = c1 * r1 * (p - x);
  const double social = c2 * r2 * (g - x);
  const double v_next = inertia + cognitive + social;
  return {x + v_next, v_next};
}

}  // namespace oracle
