#pragma once

//
// ... Standard header files
//
#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/balance.hpp>

namespace accspmm {

/// Per-block stage lengths in seconds (any consistent unit works).
struct StageDurations {
  double g_to_shm_a = 0.0;  ///< A tile + column map, global → shared (includes decode)
  double g_to_reg_b = 0.0;  ///< B tile, global → registers
  double tc_mma = 0.0;
  double wb = 0.0;          ///< C tile write-back, once per pipeline

  void validate() const {
    if (!(g_to_shm_a >= 0.0) || !(g_to_reg_b >= 0.0) || !(tc_mma >= 0.0) || !(wb >= 0.0))
      throw std::invalid_argument("stage durations must be non-negative");
  }

  friend bool operator==(const StageDurations&, const StageDurations&) = default;
};

enum class Resource { copy_engine, load_path, tensor_core };

inline const char* to_string(Resource r) {
  switch (r) {
    case Resource::copy_engine: return "GToSHM";
    case Resource::load_path: return "GToReg";
    case Resource::tensor_core: return "TCMMA";
  }
  return "?";
}

struct TraceEvent {
  Resource resource{};
  std::string label;
  double start = 0.0;
  double end = 0.0;
  std::size_t blocks = 0;  ///< blocks carried by this event (0 for write-back)
};

struct PipelineTrace {
  std::string pipeline;
  std::size_t n_blocks = 0;
  std::size_t blocks_per_stage = 1;
  StageDurations durations;
  std::vector<TraceEvent> events;
  double makespan = 0.0;
  double tc_busy = 0.0;
  double bubble = 0.0;  ///< idle tensor-core time between first MMA start and last MMA end
};

struct SimOptions {
  std::size_t blocks_per_stage = 1;
};

namespace detail {

enum class Rules { dtc, acc };

// Event rules per stage i:
//   dtc: A_i waits for MMA_{i-1} to start, B_i for MMA_{i-1} to end (one B buffer).
//   acc: A_i and B_i wait for MMA_{i-2} to end (two buffers each).
//   both: MMA_i needs A_i, B_i and MMA_{i-1}; one write-back after the last MMA.
inline PipelineTrace simulate(Rules rules, std::size_t n_blocks, const StageDurations& d,
                              SimOptions opts) {
  if (n_blocks == 0) throw std::invalid_argument("simulate: n_blocks must be at least 1");
  if (opts.blocks_per_stage == 0) throw std::invalid_argument("simulate: blocks_per_stage must be positive");
  d.validate();

  PipelineTrace tr;
  tr.pipeline = rules == Rules::dtc ? "dtc" : "acc";
  tr.n_blocks = n_blocks;
  tr.blocks_per_stage = opts.blocks_per_stage;
  tr.durations = d;

  const std::size_t stages = (n_blocks + opts.blocks_per_stage - 1) / opts.blocks_per_stage;
  std::vector<double> mma_start(stages), mma_end(stages);
  double copy_free = 0.0, load_free = 0.0;
  std::size_t mma_blocks = 0;

  for (std::size_t i = 0; i < stages; ++i) {
    const std::size_t blocks = std::min(opts.blocks_per_stage, n_blocks - i * opts.blocks_per_stage);
    const double k = static_cast<double>(blocks);
    const std::string tag = std::to_string(i);

    double a_dep = 0.0, b_dep = 0.0;
    if (rules == Rules::dtc) {
      if (i >= 1) a_dep = mma_start[i - 1], b_dep = mma_end[i - 1];
    } else if (i >= 2) {
      a_dep = b_dep = mma_end[i - 2];
    }

    const double a_start = std::max(copy_free, a_dep);
    const double a_end = a_start + k * d.g_to_shm_a;
    copy_free = a_end;
    tr.events.push_back({Resource::copy_engine, "A" + tag, a_start, a_end, blocks});

    const double b_start = std::max(load_free, b_dep);
    const double b_end = b_start + k * d.g_to_reg_b;
    load_free = b_end;
    tr.events.push_back({Resource::load_path, "B" + tag, b_start, b_end, blocks});

    mma_start[i] = std::max({a_end, b_end, i >= 1 ? mma_end[i - 1] : 0.0});
    mma_end[i] = mma_start[i] + k * d.tc_mma;
    tr.events.push_back({Resource::tensor_core, "MMA" + tag, mma_start[i], mma_end[i], blocks});
    mma_blocks += blocks;
  }

  const double wb_start = std::max(mma_end.back(), load_free);
  tr.events.push_back({Resource::load_path, "WB", wb_start, wb_start + d.wb, 0});
  tr.makespan = wb_start + d.wb;
  tr.tc_busy = static_cast<double>(mma_blocks) * d.tc_mma;
  tr.bubble = std::max(0.0, mma_end.back() - mma_start.front() - tr.tc_busy);
  return tr;
}

} // namespace detail

/// Baseline pipeline: B is reloaded only after the previous MMA retires.
inline PipelineTrace simulate_dtc(std::size_t n_blocks, const StageDurations& d, SimOptions opts = {}) {
  return detail::simulate(detail::Rules::dtc, n_blocks, d, opts);
}

/// Double-buffered pipeline: A and B for the next stage load under the current MMA.
inline PipelineTrace simulate_acc(std::size_t n_blocks, const StageDurations& d, SimOptions opts = {}) {
  return detail::simulate(detail::Rules::acc, n_blocks, d, opts);
}

/// Makespan saved by the double-buffered pipeline on the same workload.
inline double gap(const PipelineTrace& dtc, const PipelineTrace& acc) {
  if (dtc.n_blocks != acc.n_blocks || !(dtc.durations == acc.durations) ||
      dtc.blocks_per_stage != acc.blocks_per_stage)
    throw std::invalid_argument("gap: traces come from different workloads");
  return dtc.makespan - acc.makespan;
}

/// Stage lengths for one block from the cost-model terms of a hardware profile.
inline StageDurations durations_from_profile(const HardwareProfile& hw, std::size_t feature_dim) {
  hw.validate();
  if (feature_dim == 0) throw std::invalid_argument("durations_from_profile: feature_dim must be positive");
  const double f = static_cast<double>(feature_dim);
  StageDurations d;
  d.g_to_reg_b = kTileK * f * kBytesPerElement / hw.mem_bandwidth;
  d.tc_mma = kTileM * (2.0 * kTileK - 1.0) * f / hw.tf32_flops;
  d.wb = kTileK * f * kBytesPerElement / hw.mem_bandwidth;
  d.g_to_shm_a = (64.0 * kBytesPerElement + 8.0 * kBytesPerElement) / hw.mem_bandwidth;
  return d;
}

struct UnitSimulation {
  double dtc_total = 0.0;  ///< sum of unit makespans
  double acc_total = 0.0;
  double dtc_max = 0.0;    ///< slowest unit
  double acc_max = 0.0;
  std::size_t units = 0;
};

/// Runs both pipelines once per work unit, each unit processing its blocks back to back.
inline UnitSimulation simulate_schedule(const Schedule& s, const StageDurations& d, SimOptions opts = {}) {
  UnitSimulation r;
  for (const auto& u : s.units) {
    const auto n = u.blocks();
    if (n == 0) continue;
    const auto dtc = simulate_dtc(n, d, opts);
    const auto acc = simulate_acc(n, d, opts);
    r.dtc_total += dtc.makespan;
    r.acc_total += acc.makespan;
    r.dtc_max = std::max(r.dtc_max, dtc.makespan);
    r.acc_max = std::max(r.acc_max, acc.makespan);
    ++r.units;
  }
  return r;
}

} // namespace accspmm
