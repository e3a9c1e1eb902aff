#pragma once

//
// ... Standard header files
//
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/balance.hpp>
#include <accspmm/bittcf.hpp>
#include <accspmm/core.hpp>
#include <accspmm/reorder.hpp>
#include <accspmm/tile.hpp>

namespace accspmm {

/// MMA dimensions after swapping operands: an 8x8 sparse tile times an
/// 8x16 strip of B.
struct MmaShape {
  static constexpr std::size_t m = 8;
  static constexpr std::size_t k = 8;
  static constexpr std::size_t n = 16;
};

/// c_acc (8 x n) += tile (8x8, row-major) · b_slice (8 x n). Only bits set
/// in `mask` contribute.
inline void mma_tile(const std::array<double, kBlockCells>& tile, std::uint64_t mask,
                     std::span<const double> b_slice, std::span<double> c_acc, std::size_t n) {
  if (n > MmaShape::n) throw std::invalid_argument("mma_tile: strip wider than 16");
  if (b_slice.size() < MmaShape::k * n || c_acc.size() < MmaShape::m * n)
    throw std::invalid_argument("mma_tile: operand too small");
  for (auto m = mask; m != 0; m &= m - 1) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(m));
    const auto r = bit / kBlockWidth, k = bit % kBlockWidth;
    const double a = tile[bit];
    const double* b = b_slice.data() + k * n;
    double* c = c_acc.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
  }
}

struct ExecOptions {
  std::size_t threads = 1;
};

namespace detail {

/// Dense 8x8 tile from the BitTCF value run of block b.
inline std::array<double, kBlockCells> load_tile(const BitTcf& t, std::size_t b) {
  std::array<double, kBlockCells> tile{};
  const auto mask = t.tc_local_bit[b];
  const std::size_t base = t.tc_offset[b];
  for (auto m = mask; m != 0; m &= m - 1) {
    const auto k = static_cast<unsigned>(std::countr_zero(m));
    tile[k] = t.values[base + bit_value_offset(mask, k)];
  }
  return tile;
}

inline std::uint64_t lane_bits(std::uint64_t mask, std::size_t lane) {
  std::uint64_t bits = 0;
  for (std::size_t r = 0; r < kWindowHeight; ++r) bits |= mask & (std::uint64_t{1} << block_bit(r, lane));
  return bits;
}

/// Accumulates one segment into acc (8 x feature_dim, row-major).
inline void run_segment(const BitTcf& t, const DenseMatrix& b, const Segment& seg,
                        std::vector<double>& acc) {
  const std::size_t f = b.num_cols;
  acc.assign(kWindowHeight * f, 0.0);
  std::array<double, MmaShape::k * MmaShape::n> b_slice{};
  std::array<double, MmaShape::m * MmaShape::n> c_strip{};
  for (std::size_t s0 = 0; s0 < f; s0 += MmaShape::n) {
    const std::size_t n = std::min(MmaShape::n, f - s0);
    c_strip.fill(0.0);
    for (auto blk = seg.first_block; blk < seg.first_block + seg.block_count; ++blk) {
      const auto mask = t.tc_local_bit[blk];
      for (std::size_t lane = 0; lane < MmaShape::k; ++lane) {
        double* dst = b_slice.data() + lane * n;
        if (lane_bits(mask, lane) == 0) {
          std::fill_n(dst, n, 0.0);
          continue;
        }
        const double* src = b.row(t.sparse_a_to_b[blk * kBlockWidth + lane]) + s0;
        std::copy_n(src, n, dst);
      }
      mma_tile(load_tile(t, blk), mask, b_slice, c_strip, n);
    }
    for (std::size_t r = 0; r < kWindowHeight; ++r)
      std::copy_n(c_strip.data() + r * n, n, acc.data() + r * f + s0);
  }
}

} // namespace detail

/// SpMM over BitTCF following a schedule. Segments may run on any worker;
/// their partial tiles are then added into C in schedule order, so the
/// result does not depend on the thread count.
inline DenseMatrix spmm_bittcf(const BitTcf& t, const DenseMatrix& b, const Schedule& schedule,
                               ExecOptions opts = {}) {
  if (t.num_cols != b.num_rows) throw DimensionError("spmm_bittcf: a.num_cols != b.num_rows");
  std::vector<Segment> segs;
  for (const auto& u : schedule.units)
    for (const auto& s : u.segments) {
      if (s.window_id >= t.num_windows() || s.first_block < t.row_window_offset[s.window_id] ||
          s.first_block + s.block_count > t.row_window_offset[s.window_id + 1])
        throw std::invalid_argument("spmm_bittcf: schedule does not match matrix");
      segs.push_back(s);
    }

  std::vector<std::vector<double>> partial(segs.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.threads, segs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < segs.size(); ++i) detail::run_segment(t, b, segs[i], partial[i]);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < segs.size(); i += workers) detail::run_segment(t, b, segs[i], partial[i]);
      });
  }

  DenseMatrix c(t.num_rows, b.num_cols);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto r0 = segs[i].window_id * kWindowHeight;
    const auto rows = std::min(kWindowHeight, t.num_rows - r0);
    for (std::size_t r = 0; r < rows; ++r) {
      double* dst = c.row(r0 + r);
      const double* src = partial[i].data() + r * b.num_cols;
      for (std::size_t j = 0; j < b.num_cols; ++j) dst[j] += src[j];
    }
  }
  return c;
}

/// One segment per nonempty window, i.e. no balancing.
inline Schedule window_schedule(const BitTcf& t) {
  Schedule s;
  for (std::size_t w = 0; w < t.num_windows(); ++w) {
    const auto first = t.row_window_offset[w], last = t.row_window_offset[w + 1];
    if (first == last) continue;
    WorkUnit u;
    u.segments.push_back({w, first, last - first, false});
    s.units.push_back(std::move(u));
  }
  return s;
}

inline DenseMatrix spmm_bittcf(const BitTcf& t, const DenseMatrix& b, ExecOptions opts = {}) {
  return spmm_bittcf(t, b, window_schedule(t), opts);
}

// -- Verification --

struct ErrorStats {
  double max_abs = 0.0;
  double max_rel = 0.0;
};

/// Element-wise error of `got` against `ref`. Relative error divides by the
/// magnitude sum Σ|a_ik·b_kj| of the element, the natural scale for
/// reordered dot products; zero-scale elements must match exactly.
inline ErrorStats compare(const DenseMatrix& got, const DenseMatrix& ref, const DenseMatrix& scale) {
  if (got.num_rows != ref.num_rows || got.num_cols != ref.num_cols ||
      scale.num_rows != ref.num_rows || scale.num_cols != ref.num_cols)
    throw DimensionError("compare: shape mismatch");
  ErrorStats e;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = std::abs(got.data[i] - ref.data[i]);
    if (!(d <= e.max_abs)) e.max_abs = d;  // propagates NaN
    const double rel = scale.data[i] > 0.0 ? d / scale.data[i] : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (!(rel <= e.max_rel)) e.max_rel = rel;
  }
  return e;
}

/// |A|·|B| through the oracle.
inline DenseMatrix magnitude_product(const CsrMatrix& a, const DenseMatrix& b) {
  CsrMatrix abs_a = a;
  for (auto& v : abs_a.values) v = std::abs(v);
  DenseMatrix abs_b = b;
  for (auto& v : abs_b.data) v = std::abs(v);
  return spmm_oracle(abs_a, abs_b);
}

struct VerifyReport {
  ErrorStats direct;
  ErrorStats reordered;
  bool reordered_ran = false;

  bool passed(double rel_tol = 1e-5) const {
    return direct.max_rel <= rel_tol && (!reordered_ran || reordered.max_rel <= rel_tol);
  }
};

/// Runs the BitTCF path and, for square A, the reordered path (A → PAPᵀ,
/// B → PB, C → Pᵀ C) against the oracle. Errors are reported, not thrown.
inline VerifyReport verify(const CsrMatrix& a, const DenseMatrix& b, ExecOptions opts = {}) {
  VerifyReport r;
  const auto ref = spmm_oracle(a, b);
  const auto scale = magnitude_product(a, b);
  r.direct = compare(spmm_bittcf(encode(a), b, opts), ref, scale);
  if (a.square()) {
    const auto re = reorder(a);
    const auto c_perm = spmm_bittcf(encode(re.matrix), apply_row_permutation(b, re.permutation), opts);
    r.reordered = compare(apply_row_permutation(c_perm, re.permutation.inverse()), ref, scale);
    r.reordered_ran = true;
  }
  return r;
}

} // namespace accspmm
