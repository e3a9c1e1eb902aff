#pragma once

//
// ... Standard header files
//
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/core.hpp>
#include <accspmm/tile.hpp>

namespace accspmm {

class CorruptFormat : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bitmap-compressed tensor-core format: per-window block offsets, per-block
/// value offsets, per-block lane-to-column maps and 64-bit occupancy masks.
struct BitTcf {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::size_t nnz = 0;
  std::vector<std::uint32_t> row_window_offset{0};
  std::vector<std::uint32_t> tc_offset{0};
  std::vector<std::uint32_t> sparse_a_to_b;
  std::vector<std::uint64_t> tc_local_bit;
  std::vector<double> values;

  std::size_t num_windows() const noexcept { return row_window_offset.size() - 1; }
  std::size_t num_blocks() const noexcept { return tc_local_bit.size(); }

  friend bool operator==(const BitTcf&, const BitTcf&) = default;
};

/// Offset of bit k's value within its block: the number of set bits below k.
constexpr std::size_t bit_value_offset(std::uint64_t mask, unsigned k) {
  return static_cast<std::size_t>(std::popcount(mask & ((std::uint64_t{1} << k) - 1)));
}

/// Throws CorruptFormat if any structural invariant is violated.
inline void validate(const BitTcf& t) {
  const auto windows = num_windows(t.num_rows);
  const auto blocks = t.tc_local_bit.size();
  if (t.row_window_offset.size() != windows + 1)
    throw CorruptFormat("bittcf: row_window_offset length != ceil(M/8)+1");
  if (t.tc_offset.size() != blocks + 1) throw CorruptFormat("bittcf: tc_offset length != blocks+1");
  if (t.sparse_a_to_b.size() != blocks * kBlockWidth)
    throw CorruptFormat("bittcf: sparse_a_to_b length != 8*blocks");
  if (t.values.size() != t.nnz) throw CorruptFormat("bittcf: values length != nnz");
  if (t.row_window_offset.front() != 0 || t.row_window_offset.back() != blocks)
    throw CorruptFormat("bittcf: row_window_offset endpoints");
  for (std::size_t w = 0; w < windows; ++w)
    if (t.row_window_offset[w] > t.row_window_offset[w + 1])
      throw CorruptFormat("bittcf: row_window_offset decreasing");
  if (t.tc_offset.front() != 0 || t.tc_offset.back() != t.nnz)
    throw CorruptFormat("bittcf: tc_offset endpoints");
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto mask = t.tc_local_bit[b];
    if (t.tc_offset[b] > t.tc_offset[b + 1] ||
        t.tc_offset[b + 1] - t.tc_offset[b] != static_cast<std::uint32_t>(std::popcount(mask)))
      throw CorruptFormat("bittcf: tc_offset does not match popcount at block " + std::to_string(b));
    for (std::size_t lane = 0; lane < kBlockWidth; ++lane) {
      std::uint64_t lane_bits = 0;
      for (std::size_t r = 0; r < kWindowHeight; ++r) lane_bits |= mask & (std::uint64_t{1} << block_bit(r, lane));
      if (lane_bits != 0 && t.sparse_a_to_b[b * kBlockWidth + lane] >= t.num_cols)
        throw CorruptFormat("bittcf: column out of range at block " + std::to_string(b));
    }
  }
  // Occupied rows of the ragged last window must lie inside the matrix.
  if (windows > 0) {
    const auto valid_rows = t.num_rows - (windows - 1) * kWindowHeight;
    const auto allowed = valid_rows >= kWindowHeight ? ~std::uint64_t{0}
                                                     : (std::uint64_t{1} << (valid_rows * kBlockWidth)) - 1;
    for (auto b = t.row_window_offset[windows - 1]; b < blocks; ++b)
      if (t.tc_local_bit[b] & ~allowed) throw CorruptFormat("bittcf: bits beyond last row");
  }
}

/// Packs a tile plan into BitTCF arrays: window-major, block-major, bit order.
inline BitTcf encode(const RowWindowPlan& plan, const CsrMatrix& a) {
  if (plan.num_rows != a.num_rows || plan.num_cols != a.num_cols || plan.nnz() != a.nnz())
    throw DimensionError("encode: plan was not built from this matrix");
  if (a.num_cols > std::numeric_limits<std::uint32_t>::max() ||
      a.nnz() > std::numeric_limits<std::uint32_t>::max() ||
      plan.num_blocks() > std::numeric_limits<std::uint32_t>::max())
    throw std::length_error("encode: matrix too large for 32-bit offsets");

  BitTcf t;
  t.num_rows = a.num_rows;
  t.num_cols = a.num_cols;
  t.nnz = a.nnz();
  const auto blocks = plan.num_blocks();
  t.row_window_offset.reserve(plan.num_windows() + 1);
  t.tc_offset.reserve(blocks + 1);
  t.sparse_a_to_b.reserve(blocks * kBlockWidth);
  t.tc_local_bit.reserve(blocks);
  t.values.reserve(t.nnz);
  for (const auto& win : plan.windows) {
    for (const auto& blk : win.blocks) {
      for (auto c : blk.col_map) t.sparse_a_to_b.push_back(static_cast<std::uint32_t>(c));
      t.tc_local_bit.push_back(blk.occupancy);
      t.values.insert(t.values.end(), blk.values.begin(), blk.values.end());
      t.tc_offset.push_back(static_cast<std::uint32_t>(t.values.size()));
    }
    t.row_window_offset.push_back(static_cast<std::uint32_t>(t.tc_local_bit.size()));
  }
  return t;
}

inline BitTcf encode(const CsrMatrix& a) { return encode(plan_tiles(a), a); }

/// Work counters filled by decode.
struct DecodeStats {
  std::size_t popcounts = 0;       ///< one per block
  std::size_t bit_iterations = 0;  ///< one per set bit; empty lanes are never visited
  std::size_t writes = 0;
};

/// Rebuilds the CSR matrix. Each block costs one popcount (to check its
/// offset) and one step per set bit.
inline CsrMatrix decode(const BitTcf& t, DecodeStats* stats = nullptr) {
  validate(t);
  DecodeStats local;
  CsrMatrix out = CsrMatrix::zeros(t.num_rows, t.num_cols);
  out.col_idx.resize(t.nnz);
  out.values.resize(t.nnz);

  // Count per row first, then place; bits inside a window are visited per
  // block, so columns per row arrive in ascending order across blocks.
  for (std::size_t w = 0; w < t.num_windows(); ++w) {
    for (auto b = t.row_window_offset[w]; b < t.row_window_offset[w + 1]; ++b) {
      for (auto m = t.tc_local_bit[b]; m != 0; m &= m - 1) {
        auto k = static_cast<unsigned>(std::countr_zero(m));
        ++out.row_ptr[w * kWindowHeight + k / kBlockWidth + 1];
      }
    }
  }
  for (std::size_t i = 0; i < t.num_rows; ++i) out.row_ptr[i + 1] += out.row_ptr[i];
  auto next = out.row_ptr;

  for (std::size_t w = 0; w < t.num_windows(); ++w) {
    for (auto b = t.row_window_offset[w]; b < t.row_window_offset[w + 1]; ++b) {
      const auto mask = t.tc_local_bit[b];
      const std::size_t base = t.tc_offset[b];
      ++local.popcounts;
      if (base + static_cast<std::size_t>(std::popcount(mask)) != t.tc_offset[b + 1])
        throw CorruptFormat("decode: offset/popcount mismatch");
      std::size_t rank = 0;  // == bit_value_offset(mask, k)
      for (auto m = mask; m != 0; m &= m - 1, ++rank) {
        ++local.bit_iterations;
        const auto k = static_cast<unsigned>(std::countr_zero(m));
        const auto row = w * kWindowHeight + k / kBlockWidth;
        const auto dst = next[row]++;
        out.col_idx[dst] = t.sparse_a_to_b[b * kBlockWidth + k % kBlockWidth];
        out.values[dst] = t.values[base + rank];
        ++local.writes;
      }
    }
  }
  for (std::size_t i = 0; i < out.num_rows; ++i)
    for (auto k = out.row_ptr[i] + 1; k < out.row_ptr[i + 1]; ++k)
      if (out.col_idx[k - 1] >= out.col_idx[k])
        throw CorruptFormat("decode: duplicate or unordered column in row " + std::to_string(i));
  if (stats) *stats = local;
  return out;
}

// -- Byte accounting (index structure only, 4-byte words, 8-byte masks) --

/// (ceil(M/8) + 11·blocks + 2) · 4
constexpr std::size_t bittcf_index_bytes(std::size_t m_rows, std::size_t num_blocks) {
  return ((m_rows + 7) / 8 + num_blocks * 11 + 2) * 4;
}

/// Same skeleton with one int8 position per nonzero instead of a 64-bit mask.
constexpr std::size_t metcf_index_bytes(std::size_t m_rows, std::size_t num_blocks,
                                        std::size_t nnz) {
  return ((m_rows + 7) / 8 + 1 + num_blocks + 1 + 8 * num_blocks) * 4 + nnz;
}

/// int32 row pointers and column indices.
constexpr std::size_t csr_index_bytes(std::size_t m_rows, std::size_t nnz) {
  return (m_rows + 1 + nnz) * 4;
}

// -- .btcf container --

inline constexpr std::array<char, 4> kBtcfMagic{'B', 'T', 'C', 'F'};
inline constexpr std::uint32_t kBtcfVersion = 1;
inline constexpr std::size_t kBtcfHeaderBytes = 4 + 4 + 5 * 8;

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptFormat("btcf: truncated stream");
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

} // namespace detail

/// Little-endian container: magic, version, five u64 counts, then the arrays
/// (u32 offsets and column map, u64 masks, f32 values).
inline std::vector<std::uint8_t> serialize(const BitTcf& t) {
  std::vector<std::uint8_t> out;
  out.reserve(kBtcfHeaderBytes + bittcf_index_bytes(t.num_rows, t.num_blocks()) + 4 * t.nnz);
  for (char c : kBtcfMagic) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_le<std::uint32_t>(out, kBtcfVersion);
  detail::put_le<std::uint64_t>(out, t.num_rows);
  detail::put_le<std::uint64_t>(out, t.num_cols);
  detail::put_le<std::uint64_t>(out, t.nnz);
  detail::put_le<std::uint64_t>(out, t.num_windows());
  detail::put_le<std::uint64_t>(out, t.num_blocks());
  for (auto v : t.row_window_offset) detail::put_le(out, v);
  for (auto v : t.tc_offset) detail::put_le(out, v);
  for (auto v : t.sparse_a_to_b) detail::put_le(out, v);
  for (auto v : t.tc_local_bit) detail::put_le(out, v);
  for (auto v : t.values) detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline BitTcf deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kBtcfMagic.data(), 4) != 0)
    throw CorruptFormat("btcf: bad magic");
  detail::Reader r(bytes.subspan(4));
  if (auto version = r.get<std::uint32_t>(); version != kBtcfVersion)
    throw CorruptFormat("btcf: unsupported version " + std::to_string(version));
  BitTcf t;
  t.num_rows = r.get<std::uint64_t>();
  t.num_cols = r.get<std::uint64_t>();
  t.nnz = r.get<std::uint64_t>();
  const auto windows = r.get<std::uint64_t>();
  const auto blocks = r.get<std::uint64_t>();
  if (windows != num_windows(t.num_rows)) throw CorruptFormat("btcf: window count mismatch");

  // Check the payload size before allocating anything.
  const std::uint64_t limit = r.remaining();
  if (windows + 1 > limit / 4 || blocks + 1 > limit / 4 || blocks > limit / 44 ||
      t.nnz > limit / 4 ||
      (windows + 1) * 4 + (blocks + 1) * 4 + blocks * 40 + t.nnz * 4 != limit)
    throw CorruptFormat("btcf: truncated stream or trailing bytes");

  t.row_window_offset.resize(windows + 1);
  for (auto& v : t.row_window_offset) v = r.get<std::uint32_t>();
  t.tc_offset.resize(blocks + 1);
  for (auto& v : t.tc_offset) v = r.get<std::uint32_t>();
  t.sparse_a_to_b.resize(blocks * kBlockWidth);
  for (auto& v : t.sparse_a_to_b) v = r.get<std::uint32_t>();
  t.tc_local_bit.resize(blocks);
  for (auto& v : t.tc_local_bit) v = r.get<std::uint64_t>();
  t.values.resize(t.nnz);
  for (auto& v : t.values) v = static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>()));
  validate(t);
  return t;
}

} // namespace accspmm
