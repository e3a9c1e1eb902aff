//
// ... Test header files
//
#include <catch_amalgamated.hpp>

//
// ... Standard header files
//
#include <bit>
#include <cstdint>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/bittcf.hpp>

#include "oracles.hpp"

namespace accspmm::testing {

namespace {

std::size_t serialized_index_bytes(const BitTcf& t) {
  return 4 * t.row_window_offset.size() + 4 * t.tc_offset.size() + 4 * t.sparse_a_to_b.size() +
         8 * t.tc_local_bit.size();
}

} // namespace

TEST_CASE("bittcf - identity 8x8", "[bittcf]") {
  auto t = encode(CsrMatrix::identity(8));
  CHECK(t.row_window_offset == std::vector<std::uint32_t>{0, 1});
  CHECK(t.tc_offset == std::vector<std::uint32_t>{0, 8});
  CHECK(t.tc_local_bit == std::vector<std::uint64_t>{0x8040201008040201ull});
  CHECK(t.sparse_a_to_b == std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(t.values == std::vector<double>(8, 1.0));
  CHECK(decode(t) == CsrMatrix::identity(8));
}

TEST_CASE("bittcf - empty 8x8", "[bittcf]") {
  auto t = encode(CsrMatrix::zeros(8, 8));
  CHECK(t.row_window_offset == std::vector<std::uint32_t>{0, 0});
  CHECK(t.num_blocks() == 0);
  CHECK(decode(t) == CsrMatrix::zeros(8, 8));
}

TEST_CASE("bittcf - two-block window maps lanes to original columns", "[bittcf]") {
  const std::vector<std::size_t> cols{1, 4, 6, 9, 12, 15, 20, 22, 30, 31};
  CooMatrix coo{8, 32, {}};
  for (std::size_t k = 0; k < cols.size(); ++k) coo.entries.push_back({k % 8, cols[k], static_cast<double>(k + 1)});
  coo.canonicalize();
  auto t = encode(coo_to_csr(coo));
  REQUIRE(t.num_blocks() == 2);
  CHECK(t.row_window_offset == std::vector<std::uint32_t>{0, 2});
  CHECK(t.sparse_a_to_b ==
        std::vector<std::uint32_t>{1, 4, 6, 9, 12, 15, 20, 22, 30, 31, 0, 0, 0, 0, 0, 0});
  CHECK(t.tc_offset == std::vector<std::uint32_t>{0, 8, 10});
  CHECK(t.tc_local_bit[1] == ((std::uint64_t{1} << block_bit(0, 0)) | (std::uint64_t{1} << block_bit(1, 1))));
}

TEST_CASE("bittcf - popcount offset", "[bittcf]") {
  const std::uint64_t mask = (1ull << 0) | (1ull << 5) | (1ull << 9);
  CHECK(bit_value_offset(mask, 9) == 2);
  CHECK(bit_value_offset(mask, 5) == 1);
  CHECK(bit_value_offset(mask, 0) == 0);
  CHECK(bit_value_offset(~0ull, 63) == 63);
}

TEST_CASE("bittcf - index byte formulas", "[bittcf]") {
  CHECK(bittcf_index_bytes(8, 1) == 56);
  CHECK(bittcf_index_bytes(16, 3) == 148);
  CHECK(bittcf_index_bytes(8, 0) == 12);
  CHECK(metcf_index_bytes(8, 1, 8) == 56);
  CHECK(metcf_index_bytes(8, 1, 64) == 112);
  CHECK(metcf_index_bytes(8, 1, 1) == 49);
  CHECK(csr_index_bytes(8, 8) == 68);
}

TEST_CASE("bittcf - roundtrip and byte accounting on random matrices", "[bittcf][property]") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const std::size_t rows = 1 + seed * 37 % 200, cols = 1 + seed * 53 % 200;
    auto a = oracle::random_csr(rows, cols, 0.001 + 0.3 * static_cast<double>(seed % 8) / 8.0, seed);
    DecodeStats stats;
    auto t = encode(a);
    CHECK(decode(t, &stats) == a);
    CHECK(stats.popcounts == t.num_blocks());
    CHECK(stats.bit_iterations == a.nnz());
    CHECK(stats.writes == a.nnz());

    const auto bytes = bittcf_index_bytes(rows, t.num_blocks());
    CHECK(bytes == serialized_index_bytes(t));
    const auto me = metcf_index_bytes(rows, t.num_blocks(), t.nnz);
    CHECK(static_cast<long long>(bytes) - static_cast<long long>(me) ==
          8 * static_cast<long long>(t.num_blocks()) - static_cast<long long>(t.nnz));

    auto blob = serialize(t);
    CHECK(blob.size() == kBtcfHeaderBytes + bytes + 4 * t.nnz);
    CHECK(deserialize(blob) == t);
  }
}

TEST_CASE("bittcf - container layout", "[bittcf]") {
  auto blob = serialize(encode(CsrMatrix::identity(8)));
  REQUIRE(blob.size() == 48 + 56 + 32);
  CHECK(blob[0] == 'B');
  CHECK(blob[1] == 'T');
  CHECK(blob[2] == 'C');
  CHECK(blob[3] == 'F');
  CHECK(blob[4] == 1);
  CHECK(blob[8] == 8);   // num_rows
  CHECK(blob[16] == 8);  // num_cols
  CHECK(blob[24] == 8);  // nnz
  CHECK(blob[32] == 1);  // num_windows
  CHECK(blob[40] == 1);  // num_blocks
  // mask of the single block after the two offset arrays and the column map
  const std::size_t mask_at = 48 + 8 + 8 + 32;
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < 8; ++i) mask |= static_cast<std::uint64_t>(blob[mask_at + i]) << (8 * i);
  CHECK(mask == 0x8040201008040201ull);
  // 1.0f little-endian
  CHECK(blob[mask_at + 8 + 3] == 0x3f);
  CHECK(blob[mask_at + 8 + 2] == 0x80);
}

TEST_CASE("bittcf - header-only stream for an empty matrix", "[bittcf]") {
  auto t = encode(CsrMatrix::zeros(0, 0));
  auto blob = serialize(t);
  CHECK(blob.size() == kBtcfHeaderBytes + 8);
  CHECK(deserialize(blob) == t);
}

TEST_CASE("bittcf - corrupted streams are rejected", "[bittcf]") {
  auto a = oracle::random_csr(40, 40, 0.2, 3);
  auto t = encode(a);
  auto blob = serialize(t);

  SECTION("bad magic") {
    blob[0] = 'X';
    CHECK_THROWS_AS(deserialize(blob), CorruptFormat);
  }
  SECTION("bad version") {
    blob[4] = 2;
    CHECK_THROWS_AS(deserialize(blob), CorruptFormat);
  }
  SECTION("truncated") {
    for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{20}, blob.size() - 1}) {
      std::vector<std::uint8_t> cut(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(n));
      CHECK_THROWS_AS(deserialize(cut), CorruptFormat);
    }
  }
  SECTION("trailing bytes") {
    blob.push_back(0);
    CHECK_THROWS_AS(deserialize(blob), CorruptFormat);
  }
  SECTION("huge counts do not allocate") {
    for (int i = 0; i < 8; ++i) blob[40 + i] = 0xff;
    CHECK_THROWS_AS(deserialize(blob), CorruptFormat);
  }
  SECTION("every single-bit flip in tc_offset") {
    const std::size_t begin = kBtcfHeaderBytes + 4 * t.row_window_offset.size();
    const std::size_t end = begin + 4 * t.tc_offset.size();
    for (std::size_t byte = begin; byte < end; ++byte)
      for (int bit = 0; bit < 8; ++bit) {
        auto m = blob;
        m[byte] ^= static_cast<std::uint8_t>(1u << bit);
        CHECK_THROWS_AS(deserialize(m), CorruptFormat);
      }
  }
  SECTION("every single-bit flip in the masks") {
    const std::size_t begin = kBtcfHeaderBytes + 4 * (t.row_window_offset.size() + t.tc_offset.size() +
                                                       t.sparse_a_to_b.size());
    const std::size_t end = begin + 8 * t.tc_local_bit.size();
    for (std::size_t byte = begin; byte < end; ++byte)
      for (int bit = 0; bit < 8; ++bit) {
        auto m = blob;
        m[byte] ^= static_cast<std::uint8_t>(1u << bit);
        CHECK_THROWS_AS(deserialize(m), CorruptFormat);
      }
  }
}

TEST_CASE("bittcf - in-memory validation", "[bittcf]") {
  auto t = encode(CsrMatrix::identity(10));
  auto bad = t;
  bad.sparse_a_to_b[0] = 99;
  CHECK_THROWS_AS(decode(bad), CorruptFormat);
  bad = t;
  bad.tc_local_bit.back() |= 1ull << 63;
  bad.tc_offset.back() += 1;
  bad.nnz += 1;
  bad.values.push_back(1.0);
  CHECK_THROWS_AS(decode(bad), CorruptFormat);
  bad = t;
  bad.row_window_offset[1] = 0;
  CHECK_THROWS_AS(decode(bad), CorruptFormat);
}

} // namespace accspmm::testing
