#pragma once

//
// ... Standard header files
//
#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/core.hpp>

namespace accspmm {

inline constexpr std::size_t kWindowHeight = 8;
inline constexpr std::size_t kBlockWidth = 8;
inline constexpr std::size_t kBlockCells = kWindowHeight * kBlockWidth;

/// Bit index of local (row, col) inside an 8x8 block; bit 0 is least significant.
constexpr unsigned block_bit(std::size_t local_row, std::size_t local_col) {
  return static_cast<unsigned>(local_row * kBlockWidth + local_col);
}

inline std::size_t num_windows(std::size_t num_rows) {
  return (num_rows + kWindowHeight - 1) / kWindowHeight;
}

/// One 8x8 tensor-core block of a row window. Column lanes map back to
/// original columns through col_map; lanes at or beyond `lanes` are padding
/// and hold column 0 with no occupied bits.
struct TcBlockDesc {
  std::size_t window_id = 0;
  std::size_t block_col_ordinal = 0;
  std::array<std::size_t, kBlockWidth> col_map{};
  std::size_t lanes = 0;
  std::uint64_t occupancy = 0;
  std::size_t nnz_count = 0;
  std::vector<double> values;  ///< ascending bit order

  friend bool operator==(const TcBlockDesc&, const TcBlockDesc&) = default;
};

struct RowWindow {
  std::vector<std::size_t> columns;  ///< unique, ascending
  std::vector<TcBlockDesc> blocks;

  friend bool operator==(const RowWindow&, const RowWindow&) = default;
};

struct RowWindowPlan {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::size_t window_height = kWindowHeight;
  std::vector<RowWindow> windows;

  std::size_t num_windows() const noexcept { return windows.size(); }

  std::size_t num_blocks() const noexcept {
    std::size_t b = 0;
    for (const auto& w : windows) b += w.blocks.size();
    return b;
  }

  std::size_t nnz() const noexcept {
    std::size_t n = 0;
    for (const auto& w : windows)
      for (const auto& b : w.blocks) n += b.nnz_count;
    return n;
  }

  std::vector<std::size_t> blocks_per_window() const {
    std::vector<std::size_t> c;
    c.reserve(windows.size());
    for (const auto& w : windows) c.push_back(w.blocks.size());
    return c;
  }

  friend bool operator==(const RowWindowPlan&, const RowWindowPlan&) = default;
};

/// Groups rows into windows of 8, condenses each window's nonzero columns in
/// ascending order and chunks them into 8-wide blocks.
inline RowWindowPlan plan_tiles(const CsrMatrix& a) {
  RowWindowPlan plan;
  plan.num_rows = a.num_rows;
  plan.num_cols = a.num_cols;
  plan.windows.resize(num_windows(a.num_rows));

  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    auto& win = plan.windows[w];
    const std::size_t r0 = w * kWindowHeight;
    const std::size_t r1 = std::min(r0 + kWindowHeight, a.num_rows);

    for (auto i = r0; i < r1; ++i)
      for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) win.columns.push_back(a.col_idx[k]);
    std::sort(win.columns.begin(), win.columns.end());
    win.columns.erase(std::unique(win.columns.begin(), win.columns.end()), win.columns.end());

    const std::size_t nblocks = (win.columns.size() + kBlockWidth - 1) / kBlockWidth;
    win.blocks.resize(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) {
      auto& blk = win.blocks[b];
      blk.window_id = w;
      blk.block_col_ordinal = b;
      blk.lanes = std::min(kBlockWidth, win.columns.size() - b * kBlockWidth);
      for (std::size_t l = 0; l < blk.lanes; ++l) blk.col_map[l] = win.columns[b * kBlockWidth + l];
    }

    // Gather (bit, value) per block, then emit values in bit order.
    std::vector<std::vector<std::pair<unsigned, double>>> per_block(nblocks);
    for (auto i = r0; i < r1; ++i) {
      for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        auto p = static_cast<std::size_t>(
            std::lower_bound(win.columns.begin(), win.columns.end(), a.col_idx[k]) -
            win.columns.begin());
        per_block[p / kBlockWidth].emplace_back(block_bit(i - r0, p % kBlockWidth), a.values[k]);
      }
    }
    for (std::size_t b = 0; b < nblocks; ++b) {
      auto& cells_b = per_block[b];
      std::sort(cells_b.begin(), cells_b.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });
      auto& blk = win.blocks[b];
      blk.values.reserve(cells_b.size());
      for (const auto& [bit, v] : cells_b) {
        blk.occupancy |= std::uint64_t{1} << bit;
        blk.values.push_back(v);
      }
      blk.nnz_count = cells_b.size();
    }
  }
  return plan;
}

/// Average nonzeros per TC block.
inline double mean_nnz_tc(const RowWindowPlan& plan) {
  const auto blocks = plan.num_blocks();
  if (blocks == 0) throw std::domain_error("mean_nnz_tc: plan has no blocks");
  return static_cast<double>(plan.nnz()) / static_cast<double>(blocks);
}

/// Row-major dense 8x8 expansion of a block.
inline std::array<double, kBlockCells> expand_block(const TcBlockDesc& b) {
  std::array<double, kBlockCells> tile{};
  std::size_t idx = 0;
  for (auto m = b.occupancy; m != 0; m &= m - 1) tile[std::countr_zero(m)] = b.values[idx++];
  return tile;
}

} // namespace accspmm
