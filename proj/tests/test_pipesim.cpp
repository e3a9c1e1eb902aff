//
// ... Test header files
//
#include <catch_amalgamated.hpp>

//
// ... Standard header files
//
#include <algorithm>
#include <map>
#include <random>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/json.hpp>
#include <accspmm/pipesim.hpp>

namespace accspmm::testing {

namespace {

bool no_overlap(const PipelineTrace& t) {
  std::map<Resource, std::vector<std::pair<double, double>>> by;
  for (const auto& e : t.events) {
    if (e.end < e.start) return false;
    by[e.resource].push_back({e.start, e.end});
  }
  for (auto& [r, iv] : by) {
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i)
      if (iv[i].first < iv[i - 1].second) return false;
  }
  return true;
}

std::vector<double> mma_starts(const PipelineTrace& t) {
  std::vector<double> s;
  for (const auto& e : t.events)
    if (e.resource == Resource::tensor_core) s.push_back(e.start);
  return s;
}

StageDurations random_durations(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  return {u(rng), u(rng), u(rng), u(rng)};
}

} // namespace

TEST_CASE("pipesim - worked memory-bound example", "[pipesim]") {
  const StageDurations d{4, 4, 1, 2};
  auto dtc = simulate_dtc(3, d);
  auto acc = simulate_acc(3, d);
  CHECK(dtc.makespan == 17.0);
  CHECK(acc.makespan == 15.0);
  CHECK(gap(dtc, acc) == 2.0);
  CHECK(mma_starts(dtc) == std::vector<double>{4, 9, 14});
  CHECK(mma_starts(acc) == std::vector<double>{4, 8, 12});
  CHECK(dtc.tc_busy == 3.0);
  CHECK(acc.tc_busy == 3.0);
  CHECK(dtc.bubble == 8.0);
  CHECK(acc.bubble == 6.0);
}

TEST_CASE("pipesim - single block", "[pipesim]") {
  const StageDurations d{3, 5, 2, 1};
  auto dtc = simulate_dtc(1, d), acc = simulate_acc(1, d);
  CHECK(dtc.makespan == std::max(3.0, 5.0) + 2 + 1);
  CHECK(acc.makespan == dtc.makespan);
  CHECK(gap(dtc, acc) == 0.0);
  CHECK(dtc.bubble == 0.0);
}

TEST_CASE("pipesim - zero compute exposes the B load stalls", "[pipesim]") {
  const StageDurations d{1, 3, 0, 0};
  auto dtc = simulate_dtc(4, d);
  CHECK(dtc.tc_busy == 0.0);
  CHECK(dtc.bubble == 3.0 * 3);
}

TEST_CASE("pipesim - compute-bound double buffering has no steady-state bubble", "[pipesim][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double mma = 1.0 + u(rng);
    const StageDurations d{mma * u(rng), mma * u(rng), mma, u(rng)};
    auto acc = simulate_acc(1 + rng() % 40, d);
    CHECK(acc.bubble == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("pipesim - invariants over random workloads", "[pipesim][property]") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const auto d = random_durations(rng);
    const std::size_t n = 1 + rng() % 64;
    auto dtc = simulate_dtc(n, d), acc = simulate_acc(n, d);
    CHECK(acc.makespan <= dtc.makespan);
    CHECK(dtc.tc_busy == static_cast<double>(n) * d.tc_mma);
    CHECK(acc.tc_busy == static_cast<double>(n) * d.tc_mma);
    CHECK(dtc.bubble >= 0.0);
    CHECK(acc.bubble >= 0.0);
    CHECK(no_overlap(dtc));
    CHECK(no_overlap(acc));
  }
}

TEST_CASE("pipesim - gap grows with n when loads dominate", "[pipesim][property]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double mma = u(rng);
    const StageDurations d{u(rng), mma + 0.01 + u(rng), mma, u(rng)};
    double prev = -1.0;
    for (std::size_t n = 1; n <= 40; ++n) {
      const double g = gap(simulate_dtc(n, d), simulate_acc(n, d));
      CHECK(g >= prev - 1e-9);
      prev = g;
    }
  }
}

TEST_CASE("pipesim - blocks per stage", "[pipesim]") {
  const StageDurations d{1, 2, 0.5, 1};
  auto t = simulate_acc(5, d, SimOptions{2});
  CHECK(t.tc_busy == 5 * 0.5);
  CHECK(mma_starts(t).size() == 3);
  CHECK(t.events.size() == 3 * 3 + 1);
  CHECK_THROWS(simulate_acc(5, d, SimOptions{0}));
  CHECK_THROWS(simulate_dtc(0, d));
  CHECK_THROWS(simulate_dtc(1, StageDurations{-1, 0, 0, 0}));
  CHECK_THROWS(gap(simulate_dtc(5, d), simulate_acc(4, d)));
}

TEST_CASE("pipesim - durations from profiles", "[pipesim]") {
  auto a800 = *find_profile("a800"), h100 = *find_profile("h100");
  auto d = durations_from_profile(a800, 128);
  CHECK(d.g_to_reg_b == Catch::Approx(2.12e-9).epsilon(2e-3));
  CHECK(d.tc_mma == Catch::Approx(9.85e-11).epsilon(1e-3));
  CHECK(d.wb == d.g_to_reg_b);
  CHECK(d.g_to_shm_a == Catch::Approx(288.0 / 1935e9).epsilon(1e-12));
  CHECK(d.tc_mma < d.g_to_reg_b);

  auto e = durations_from_profile(h100, 128);
  CHECK(e.g_to_reg_b / d.g_to_reg_b == Catch::Approx(1935.0 / 3350.0).epsilon(1e-12));
  CHECK(e.g_to_shm_a / d.g_to_shm_a == Catch::Approx(1935.0 / 3350.0).epsilon(1e-12));
  CHECK(e.wb / d.wb == Catch::Approx(1935.0 / 3350.0).epsilon(1e-12));

  auto fast = a800;
  fast.tf32_flops = 1e300;
  CHECK(durations_from_profile(fast, 128).tc_mma < 1e-280);
}

TEST_CASE("pipesim - schedule simulation", "[pipesim]") {
  Schedule s;
  s.units.push_back({{{0, 0, 3, false}}, 0.0});
  s.units.push_back({{{1, 3, 1, false}}, 0.0});
  const StageDurations d{4, 4, 1, 2};
  auto r = simulate_schedule(s, d);
  CHECK(r.units == 2);
  CHECK(r.dtc_total == 17.0 + 7.0);
  CHECK(r.acc_total == 15.0 + 7.0);
  CHECK(r.dtc_max == 17.0);
}

TEST_CASE("pipesim - trace export", "[pipesim]") {
  const StageDurations d{4, 4, 1, 2};
  std::vector<PipelineTrace> traces{simulate_dtc(3, d), simulate_acc(3, d)};
  auto j = to_chrome_trace(traces, 1.0);
  const auto& ev = j["traceEvents"];
  std::size_t complete = 0;
  for (const auto& e : ev)
    if (e["ph"] == "X") {
      ++complete;
      CHECK(e["dur"].get<double>() >= 0.0);
    }
  CHECK(complete == traces[0].events.size() + traces[1].events.size());
  CHECK(to_json(traces[0])["makespan"] == 17.0);
  CHECK(to_json(traces[0]) == to_json(simulate_dtc(3, d)));
}

} // namespace accspmm::testing
