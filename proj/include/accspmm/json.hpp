#pragma once

//
// ... Standard header files
//
#include <span>

//
// ... Third-party header files
//
#include <json.hpp>

//
// ... accspmm header files
//
#include <accspmm/balance.hpp>
#include <accspmm/pipesim.hpp>

namespace accspmm {

inline nlohmann::json to_json(const HardwareProfile& hw) {
  return {{"name", hw.name}, {"mem_bandwidth", hw.mem_bandwidth}, {"tf32_flops", hw.tf32_flops}};
}

/// unit → segments → predicted time
inline nlohmann::json to_json(const Schedule& s) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : s.units) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& seg : u.segments)
      segs.push_back({{"window", seg.window_id},
                      {"first_block", seg.first_block},
                      {"block_count", seg.block_count},
                      {"cross_row", seg.cross_row}});
    units.push_back({{"blocks", u.blocks()}, {"predicted_time", u.predicted_time}, {"segments", segs}});
  }
  return {{"balanced", s.balanced},
          {"ibd", s.ibd},
          {"write_backs", s.write_backs()},
          {"max_predicted_time", s.max_predicted_time()},
          {"mean_predicted_time", s.mean_predicted_time()},
          {"units", units}};
}

inline nlohmann::json to_json(const StageDurations& d) {
  return {{"g_to_shm_a", d.g_to_shm_a}, {"g_to_reg_b", d.g_to_reg_b}, {"tc_mma", d.tc_mma}, {"wb", d.wb}};
}

inline nlohmann::json to_json(const PipelineTrace& t) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : t.events)
    events.push_back({{"resource", to_string(e.resource)},
                      {"label", e.label},
                      {"start", e.start},
                      {"end", e.end},
                      {"blocks", e.blocks}});
  return {{"pipeline", t.pipeline},
          {"n_blocks", t.n_blocks},
          {"blocks_per_stage", t.blocks_per_stage},
          {"durations", to_json(t.durations)},
          {"makespan", t.makespan},
          {"tc_busy", t.tc_busy},
          {"bubble", t.bubble},
          {"events", events}};
}

/// Chrome trace-event format ("X" complete events, microseconds). Each
/// trace becomes one process, each resource one thread.
inline nlohmann::json to_chrome_trace(std::span<const PipelineTrace> traces, double time_scale = 1e6) {
  nlohmann::json events = nlohmann::json::array();
  int pid = 1;
  for (const auto& t : traces) {
    events.push_back({{"name", "process_name"}, {"ph", "M"}, {"pid", pid}, {"args", {{"name", t.pipeline}}}});
    for (auto r : {Resource::copy_engine, Resource::load_path, Resource::tensor_core})
      events.push_back({{"name", "thread_name"},
                        {"ph", "M"},
                        {"pid", pid},
                        {"tid", static_cast<int>(r)},
                        {"args", {{"name", to_string(r)}}}});
    for (const auto& e : t.events)
      events.push_back({{"name", e.label},
                        {"cat", t.pipeline},
                        {"ph", "X"},
                        {"pid", pid},
                        {"tid", static_cast<int>(e.resource)},
                        {"ts", e.start * time_scale},
                        {"dur", (e.end - e.start) * time_scale}});
    ++pid;
  }
  return {{"traceEvents", events}, {"displayTimeUnit", "ns"}};
}

} // namespace accspmm
