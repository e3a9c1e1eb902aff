//
// ... Test header files
//
#include <catch_amalgamated.hpp>

//
// ... Standard header files
//
#include <array>
#include <random>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/executor.hpp>

#include "oracles.hpp"

namespace accspmm::testing {

TEST_CASE("executor - mma tile identity and empty", "[executor]") {
  std::array<double, 64> id{};
  for (std::size_t r = 0; r < 8; ++r) id[block_bit(r, r)] = 1.0;
  auto b = random_dense(8, 16, 1);
  std::vector<double> c(8 * 16, 0.0);
  mma_tile(id, 0x8040201008040201ull, b.data, c, 16);
  CHECK(c == b.data);

  std::vector<double> before = c;
  mma_tile(std::array<double, 64>{}, 0, b.data, c, 16);
  CHECK(c == before);

  std::vector<double> wide_b(8 * 17), wide_c(8 * 17);
  CHECK_THROWS(mma_tile(id, 0, wide_b, wide_c, 17));
}

TEST_CASE("executor - mma tile matches triple loop", "[executor][property]") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> val(-20, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<double, 64> tile{};
    std::uint64_t mask = rng();
    for (std::size_t k = 0; k < 64; ++k)
      if ((mask >> k) & 1u) tile[k] = val(rng);
    std::vector<double> b(8 * 16), c(8 * 16), expect(8 * 16);
    for (auto& x : b) x = val(rng);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = expect[i] = val(rng);
    for (std::size_t m = 0; m < 8; ++m)
      for (std::size_t n = 0; n < 16; ++n)
        for (std::size_t k = 0; k < 8; ++k) expect[m * 16 + n] += tile[m * 8 + k] * b[k * 16 + n];
    mma_tile(tile, mask, b, c, 16);
    CHECK(c == expect);
  }
}

TEST_CASE("executor - identity reproduces B", "[executor]") {
  auto b = random_dense(20, 33, 2);
  CHECK(spmm_bittcf(encode(CsrMatrix::identity(20)), b) == b);
}

TEST_CASE("executor - single entry", "[executor]") {
  auto a = coo_to_csr(CooMatrix{8, 8, {{1, 2, 3.0}}});
  auto b = random_dense(8, 5, 3);
  auto c = spmm_bittcf(encode(a), b);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(c(i, j) == (i == 1 ? 3.0 * b(2, j) : 0.0));
}

TEST_CASE("executor - exact on integer inputs", "[executor][property]") {
  for (std::size_t f : {16u, 32u, 128u, 7u, 40u})
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      auto a = oracle::random_csr(50 + seed * 9, 70, 0.08, seed, true);
      auto b = oracle::random_integer_dense(70, f, seed);
      CHECK(spmm_bittcf(encode(a), b) == oracle::dense_spmm(a, b));
    }
}

TEST_CASE("executor - float inputs within tolerance", "[executor][property]") {
  for (std::size_t f : {16u, 32u, 128u})
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      auto a = oracle::random_csr(96, 96, 0.1, seed);
      auto b = random_dense(96, f, seed);
      auto e = compare(spmm_bittcf(encode(a), b), oracle::dense_spmm(a, b), magnitude_product(a, b));
      CHECK(e.max_rel <= 1e-5);
    }
}

TEST_CASE("executor - thread count and segment order do not change the result", "[executor][property]") {
  auto a = oracle::random_csr(200, 150, 0.05, 9);
  auto b = random_dense(150, 24, 9);
  auto t = encode(a);
  auto one = spmm_bittcf(t, b, ExecOptions{1});
  CHECK(spmm_bittcf(t, b, ExecOptions{4}) == one);
  CHECK(spmm_bittcf(t, b, ExecOptions{64}) == one);

  auto rev = window_schedule(t);
  std::reverse(rev.units.begin(), rev.units.end());
  auto c = spmm_bittcf(t, b, rev);
  auto e = compare(c, one, magnitude_product(a, b));
  CHECK(e.max_rel <= 1e-12);
}

TEST_CASE("executor - split segments", "[executor]") {
  auto a = oracle::matrix_with_window_blocks({3, 70, 1}, 600, 4);
  auto b = oracle::random_integer_dense(600, 16, 4);
  auto t = encode(a);
  auto ref = oracle::dense_spmm(a, b);
  Schedule s;
  std::vector<std::size_t> cuts{0, 3, 20, 55, 73, 74};
  std::vector<std::size_t> window{0, 1, 1, 1, 2};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    WorkUnit u;
    u.segments.push_back({window[i], cuts[i], cuts[i + 1] - cuts[i], cuts[i] != t.row_window_offset[window[i]]});
    s.units.push_back(u);
  }
  CHECK(spmm_bittcf(t, b, s) == ref);
  CHECK(spmm_bittcf(t, b, s, ExecOptions{3}) == ref);

  Schedule bad = s;
  bad.units[1].segments[0].window_id = 0;
  CHECK_THROWS(spmm_bittcf(t, b, bad));
  CHECK_THROWS_AS(spmm_bittcf(t, DenseMatrix(5, 4)), DimensionError);
}

TEST_CASE("executor - compare", "[executor]") {
  DenseMatrix ref(1, 3), got(1, 3), scale(1, 3, 1.0);
  ref.data = {1.0, 0.0, 2.0};
  got.data = {1.0, 0.0, 2.5};
  auto e = compare(got, ref, scale);
  CHECK(e.max_abs == 0.5);
  CHECK(e.max_rel == 0.5);
  scale.data[1] = 0.0;
  got.data[1] = 1e-30;
  CHECK(std::isinf(compare(got, ref, scale).max_rel));
  CHECK_THROWS_AS(compare(got, DenseMatrix(2, 3), scale), DimensionError);
}

TEST_CASE("executor - verify report", "[executor]") {
  auto ai = oracle::random_csr(64, 64, 0.1, 2, true);
  auto bi = oracle::random_integer_dense(64, 16, 2);
  auto r = verify(ai, bi);
  CHECK(r.reordered_ran);
  CHECK(r.direct.max_abs == 0.0);
  CHECK(r.reordered.max_abs == 0.0);
  CHECK(r.passed());

  auto id = verify(CsrMatrix::identity(16), random_dense(16, 8, 1));
  CHECK(id.direct.max_abs == 0.0);
  CHECK(id.reordered.max_abs == 0.0);

  auto af = oracle::random_csr(256, 256, 0.05, 3);
  auto ff = verify(af, random_dense(256, 32, 3), ExecOptions{2});
  CHECK(ff.direct.max_rel <= 1e-5);
  CHECK(ff.reordered.max_rel <= 1e-5);

  auto rect = verify(oracle::random_csr(20, 30, 0.2, 1), random_dense(30, 4, 1));
  CHECK_FALSE(rect.reordered_ran);
}

} // namespace accspmm::testing
