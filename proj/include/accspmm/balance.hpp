#pragma once

//
// ... Standard header files
//
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/bittcf.hpp>
#include <accspmm/tile.hpp>

namespace accspmm {

struct HardwareProfile {
  std::string name;
  double mem_bandwidth = 0.0;  ///< bytes / second
  double tf32_flops = 0.0;     ///< flop / second

  void validate() const {
    if (!(mem_bandwidth > 0.0) || !(tf32_flops > 0.0))
      throw std::invalid_argument("hardware profile '" + name + "': bandwidth and flops must be positive");
  }
};

inline std::array<HardwareProfile, 3> builtin_profiles() {
  return {{
      {"rtx4090", 1008e9, 82.6e12},
      {"a800", 1935e9, 156e12},
      {"h100", 3.35e12, 494.7e12},
  }};
}

inline std::optional<HardwareProfile> find_profile(std::string_view name) {
  for (auto& p : builtin_profiles())
    if (p.name == name) return p;
  return std::nullopt;
}

inline constexpr double kIbdThreshold = 8.0;
inline constexpr std::size_t kMaxBlocksPerUnit = 32;
inline constexpr double kBytesPerElement = 4.0;

// Post-swap MMA tile dimensions used by the cost model.
inline constexpr double kTileM = 8.0;
inline constexpr double kTileK = 8.0;

/// Mean absolute deviation of TC blocks per row window.
inline double compute_ibd(std::span<const std::size_t> blocks_per_window) {
  if (blocks_per_window.empty()) throw std::invalid_argument("compute_ibd: no windows");
  const double n = static_cast<double>(blocks_per_window.size());
  double sum = 0.0;
  for (auto c : blocks_per_window) sum += static_cast<double>(c);
  const double avg = sum / n;
  double dev = 0.0;
  for (auto c : blocks_per_window) dev += std::abs(static_cast<double>(c) - avg);
  return dev / n;
}

enum class WriteBackModel {
  as_printed,      ///< WB term identical to the dense-load term
  per_window_tile, ///< one M x FeatureDim tile of C per written segment
};

struct TbTime {
  double load_dense = 0.0;
  double mma = 0.0;
  double write_back = 0.0;
  bool degenerate = false;  ///< no blocks: only the MMA term remains

  double total() const noexcept { return load_dense + mma + write_back; }
};

/// Per-work-unit time: dense loads + MMA + write-back, with element counts
/// converted to bytes at 4 bytes per element.
inline TbTime predict_tb_breakdown(const HardwareProfile& hw, std::size_t feature_dim,
                                   std::size_t blocks_in_tb,
                                   WriteBackModel model = WriteBackModel::as_printed,
                                   std::size_t segments = 1) {
  hw.validate();
  if (feature_dim == 0) throw std::invalid_argument("predict_tb_time: feature_dim must be positive");
  const double f = static_cast<double>(feature_dim);
  const double blocks = static_cast<double>(blocks_in_tb);
  TbTime t;
  t.load_dense = kTileK * f * blocks * kBytesPerElement / hw.mem_bandwidth;
  t.mma = kTileM * (2.0 * kTileK - 1.0) * f / hw.tf32_flops;
  t.write_back = model == WriteBackModel::as_printed
                     ? kTileK * f * blocks * kBytesPerElement / hw.mem_bandwidth
                     : kTileM * f * static_cast<double>(segments) * kBytesPerElement / hw.mem_bandwidth;
  t.degenerate = blocks_in_tb == 0;
  return t;
}

inline double predict_tb_time(const HardwareProfile& hw, std::size_t feature_dim,
                              std::size_t blocks_in_tb,
                              WriteBackModel model = WriteBackModel::as_printed) {
  return predict_tb_breakdown(hw, feature_dim, blocks_in_tb, model).total();
}

// -- Schedules --

/// A contiguous run of blocks from one window. Every segment writes its
/// partial C tile back once; cross-row segments add into rows that another
/// segment of the same window also writes.
struct Segment {
  std::size_t window_id = 0;
  std::size_t first_block = 0;  ///< global block index
  std::size_t block_count = 0;
  bool cross_row = false;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct WorkUnit {
  std::vector<Segment> segments;
  double predicted_time = 0.0;

  std::size_t blocks() const noexcept {
    std::size_t b = 0;
    for (const auto& s : segments) b += s.block_count;
    return b;
  }

  friend bool operator==(const WorkUnit&, const WorkUnit&) = default;
};

struct Schedule {
  std::vector<WorkUnit> units;
  bool balanced = false;
  double ibd = 0.0;

  std::size_t write_backs() const noexcept {
    std::size_t n = 0;
    for (const auto& u : units) n += u.segments.size();
    return n;
  }

  double max_predicted_time() const noexcept {
    double m = 0.0;
    for (const auto& u : units) m = std::max(m, u.predicted_time);
    return m;
  }

  double mean_predicted_time() const noexcept {
    if (units.empty()) return 0.0;
    double s = 0.0;
    for (const auto& u : units) s += u.predicted_time;
    return s / static_cast<double>(units.size());
  }

  /// max / mean predicted time; 1 for an empty schedule.
  double imbalance_ratio() const noexcept {
    const double mean = mean_predicted_time();
    return mean > 0.0 ? max_predicted_time() / mean : 1.0;
  }

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct ScheduleOptions {
  WriteBackModel model = WriteBackModel::as_printed;
  double ibd_threshold = kIbdThreshold;
  std::size_t max_blocks_per_unit = kMaxBlocksPerUnit;
};

namespace detail {

inline double unit_time(const HardwareProfile& hw, std::size_t feature_dim, const WorkUnit& u,
                        WriteBackModel model) {
  return predict_tb_breakdown(hw, feature_dim, u.blocks(), model, u.segments.size()).total();
}

} // namespace detail

/// Assigns blocks to work units. Balanced windows (IBD at or below the
/// threshold) keep one unit per nonempty window. Otherwise oversized windows
/// are cut into chunks of at most max_blocks_per_unit, and all pieces are
/// packed first-fit-decreasing under both the block cap and the predicted
/// time of one full unit.
inline Schedule build_schedule(std::span<const std::size_t> blocks_per_window,
                               const HardwareProfile& hw, std::size_t feature_dim,
                               ScheduleOptions opts = {}) {
  if (blocks_per_window.empty()) throw std::invalid_argument("build_schedule: plan has no windows");
  if (opts.max_blocks_per_unit == 0) throw std::invalid_argument("build_schedule: zero unit capacity");
  hw.validate();

  std::vector<std::size_t> offset(blocks_per_window.size() + 1, 0);
  std::partial_sum(blocks_per_window.begin(), blocks_per_window.end(), offset.begin() + 1);

  Schedule s;
  s.ibd = compute_ibd(blocks_per_window);

  if (!(s.ibd > opts.ibd_threshold)) {
    for (std::size_t w = 0; w < blocks_per_window.size(); ++w) {
      if (blocks_per_window[w] == 0) continue;
      WorkUnit u;
      u.segments.push_back({w, offset[w], blocks_per_window[w], false});
      u.predicted_time = detail::unit_time(hw, feature_dim, u, opts.model);
      s.units.push_back(std::move(u));
    }
    return s;
  }

  s.balanced = true;
  const std::size_t cap = opts.max_blocks_per_unit;
  std::vector<Segment> pieces;
  for (std::size_t w = 0; w < blocks_per_window.size(); ++w) {
    for (std::size_t done = 0; done < blocks_per_window[w]; done += cap) {
      pieces.push_back({w, offset[w] + done, std::min(cap, blocks_per_window[w] - done), done > 0});
    }
  }
  std::stable_sort(pieces.begin(), pieces.end(),
                   [](const Segment& a, const Segment& b) { return a.block_count > b.block_count; });

  WorkUnit full;
  full.segments.push_back({0, 0, cap, false});
  const double target = detail::unit_time(hw, feature_dim, full, opts.model);

  for (const auto& p : pieces) {
    bool placed = false;
    for (auto& u : s.units) {
      if (u.blocks() + p.block_count > cap) continue;
      WorkUnit trial = u;
      trial.segments.push_back(p);
      const double t = detail::unit_time(hw, feature_dim, trial, opts.model);
      if (t > target) continue;
      u = std::move(trial);
      u.predicted_time = t;
      placed = true;
      break;
    }
    if (!placed) {
      WorkUnit u;
      u.segments.push_back(p);
      u.predicted_time = detail::unit_time(hw, feature_dim, u, opts.model);
      s.units.push_back(std::move(u));
    }
  }
  return s;
}

inline Schedule build_schedule(const RowWindowPlan& plan, const HardwareProfile& hw,
                               std::size_t feature_dim, ScheduleOptions opts = {}) {
  const auto counts = plan.blocks_per_window();
  return build_schedule(counts, hw, feature_dim, opts);
}

inline std::vector<std::size_t> blocks_per_window(const BitTcf& t) {
  std::vector<std::size_t> c(t.num_windows());
  for (std::size_t w = 0; w < c.size(); ++w)
    c[w] = t.row_window_offset[w + 1] - t.row_window_offset[w];
  return c;
}

inline Schedule build_schedule(const BitTcf& t, const HardwareProfile& hw,
                               std::size_t feature_dim, ScheduleOptions opts = {}) {
  const auto counts = blocks_per_window(t);
  return build_schedule(counts, hw, feature_dim, opts);
}

/// Empty string if every block is covered exactly once by segments lying
/// inside their window and no unit exceeds `cap` blocks; otherwise a reason.
inline std::string check_schedule(const Schedule& s, std::span<const std::size_t> blocks_per_window,
                                  std::size_t cap = kMaxBlocksPerUnit) {
  std::vector<std::size_t> offset(blocks_per_window.size() + 1, 0);
  std::partial_sum(blocks_per_window.begin(), blocks_per_window.end(), offset.begin() + 1);
  std::vector<int> hits(offset.back(), 0);
  for (std::size_t ui = 0; ui < s.units.size(); ++ui) {
    const auto& u = s.units[ui];
    if (s.balanced && u.blocks() > cap)
      return "unit " + std::to_string(ui) + " holds " + std::to_string(u.blocks()) + " blocks";
    for (const auto& seg : u.segments) {
      if (seg.window_id >= blocks_per_window.size()) return "segment window out of range";
      if (seg.block_count == 0) return "empty segment";
      if (seg.first_block < offset[seg.window_id] ||
          seg.first_block + seg.block_count > offset[seg.window_id + 1])
        return "segment leaves window " + std::to_string(seg.window_id);
      for (auto b = seg.first_block; b < seg.first_block + seg.block_count; ++b) ++hits[b];
    }
  }
  for (std::size_t b = 0; b < hits.size(); ++b)
    if (hits[b] != 1) return "block " + std::to_string(b) + " covered " + std::to_string(hits[b]) + " times";
  return {};
}

} // namespace accspmm
