#pragma once

//
// ... Standard header files
//
#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace accspmm {

// -- Errors --

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// -- Matrix containers --

struct CooEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;

  friend bool operator==(const CooEntry&, const CooEntry&) = default;
};

struct CooMatrix {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::vector<CooEntry> entries;

  /// Sorts entries row-major and sums duplicate coordinates.
  void canonicalize() {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<CooEntry> merged;
    merged.reserve(entries.size());
    for (const auto& e : entries) {
      if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
        merged.back().value += e.value;
      else
        merged.push_back(e);
    }
    entries = std::move(merged);
  }

  friend bool operator==(const CooMatrix&, const CooMatrix&) = default;
};

struct CsrMatrix {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return col_idx.size(); }
  bool square() const noexcept { return num_rows == num_cols; }

  /// Empty matrix with a valid row_ptr.
  static CsrMatrix zeros(std::size_t rows, std::size_t cols) {
    CsrMatrix m;
    m.num_rows = rows;
    m.num_cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    return m;
  }

  static CsrMatrix identity(std::size_t n) {
    CsrMatrix m;
    m.num_rows = m.num_cols = n;
    m.row_ptr.resize(n + 1);
    std::iota(m.row_ptr.begin(), m.row_ptr.end(), std::size_t{0});
    m.col_idx.resize(n);
    std::iota(m.col_idx.begin(), m.col_idx.end(), std::size_t{0});
    m.values.assign(n, 1.0);
    return m;
  }

  /// Throws std::invalid_argument if the CSR structure is inconsistent.
  void validate() const {
    if (row_ptr.size() != num_rows + 1 || row_ptr.front() != 0 ||
        row_ptr.back() != col_idx.size() || values.size() != col_idx.size())
      throw std::invalid_argument("csr: inconsistent array lengths");
    for (std::size_t i = 0; i < num_rows; ++i) {
      if (row_ptr[i] > row_ptr[i + 1])
        throw std::invalid_argument("csr: row_ptr decreasing");
      for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        if (col_idx[k] >= num_cols)
          throw std::invalid_argument("csr: column out of range");
        if (k > row_ptr[i] && col_idx[k - 1] >= col_idx[k])
          throw std::invalid_argument("csr: columns not strictly ascending");
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

struct DenseMatrix {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : num_rows(rows), num_cols(cols), data(rows * cols, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * num_cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * num_cols + j]; }

  double* row(std::size_t i) { return data.data() + i * num_cols; }
  const double* row(std::size_t i) const { return data.data() + i * num_cols; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

// -- Permutation --

/// Bijective relabeling of [0, n): old index i becomes new index (*this)[i].
class Permutation {
public:
  Permutation() = default;

  explicit Permutation(std::vector<std::size_t> old_to_new)
      : old_to_new_(std::move(old_to_new)) {
    std::vector<char> seen(old_to_new_.size(), 0);
    for (auto v : old_to_new_) {
      if (v >= old_to_new_.size() || seen[v])
        throw std::invalid_argument("permutation: not a bijection");
      seen[v] = 1;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    return Permutation(std::move(p));
  }

  std::size_t size() const noexcept { return old_to_new_.size(); }
  std::size_t operator[](std::size_t i) const { return old_to_new_[i]; }
  const std::vector<std::size_t>& old_to_new() const noexcept { return old_to_new_; }

  Permutation inverse() const {
    std::vector<std::size_t> inv(old_to_new_.size());
    for (std::size_t i = 0; i < old_to_new_.size(); ++i) inv[old_to_new_[i]] = i;
    return Permutation(std::move(inv));
  }

  bool is_identity() const {
    for (std::size_t i = 0; i < old_to_new_.size(); ++i)
      if (old_to_new_[i] != i) return false;
    return true;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

private:
  std::vector<std::size_t> old_to_new_;
};

/// (p ∘ q)[i] = p[q[i]]: apply q first, then p.
inline Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) throw DimensionError("compose: size mismatch");
  std::vector<std::size_t> r(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) r[i] = p[q[i]];
  return Permutation(std::move(r));
}

/// Newline-separated new indices, one line per old index.
inline void write_permutation(std::ostream& os, const Permutation& p) {
  for (auto v : p.old_to_new()) os << v << '\n';
}

inline Permutation read_permutation(std::istream& is) {
  std::vector<std::size_t> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::size_t x = 0;
    if (!(ls >> x)) throw ParseError(lineno, "expected non-negative integer");
    v.push_back(x);
  }
  try {
    return Permutation(std::move(v));
  } catch (const std::invalid_argument& e) {
    throw ParseError(lineno, e.what());
  }
}

// -- Conversions --

inline CsrMatrix coo_to_csr(const CooMatrix& m) {
  CsrMatrix out = CsrMatrix::zeros(m.num_rows, m.num_cols);
  for (const auto& e : m.entries) ++out.row_ptr[e.row + 1];
  std::partial_sum(out.row_ptr.begin(), out.row_ptr.end(), out.row_ptr.begin());
  out.col_idx.resize(m.entries.size());
  out.values.resize(m.entries.size());
  auto next = out.row_ptr;
  for (const auto& e : m.entries) {
    auto k = next[e.row]++;
    out.col_idx[k] = e.col;
    out.values[k] = e.value;
  }
  // Canonical input is already row-major sorted; this only matters for raw COO.
  for (std::size_t i = 0; i < out.num_rows; ++i) {
    auto b = out.row_ptr[i], e = out.row_ptr[i + 1];
    bool sorted = true;
    for (auto k = b + 1; k < e; ++k)
      if (out.col_idx[k - 1] > out.col_idx[k]) { sorted = false; break; }
    if (sorted) continue;
    std::vector<std::pair<std::size_t, double>> row;
    for (auto k = b; k < e; ++k) row.emplace_back(out.col_idx[k], out.values[k]);
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto k = b; k < e; ++k) {
      out.col_idx[k] = row[k - b].first;
      out.values[k] = row[k - b].second;
    }
  }
  return out;
}

inline CooMatrix csr_to_coo(const CsrMatrix& a) {
  CooMatrix m{a.num_rows, a.num_cols, {}};
  m.entries.reserve(a.nnz());
  for (std::size_t i = 0; i < a.num_rows; ++i)
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      m.entries.push_back({i, a.col_idx[k], a.values[k]});
  return m;
}

// -- MatrixMarket --

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

} // namespace detail

/// Reads a coordinate MatrixMarket stream (real/integer/pattern,
/// general/symmetric) into a canonical 0-based CooMatrix.
inline CooMatrix parse_matrix_market(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(is, line)) throw ParseError(1, "empty input");
  ++lineno;
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw ParseError(lineno, "missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw ParseError(lineno, "unsupported object '" + object + "'");
  if (format != "coordinate") throw ParseError(lineno, "unsupported format '" + format + "'");
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer")
    throw ParseError(lineno, "unsupported field '" + field + "'");
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw ParseError(lineno, "unsupported symmetry '" + symmetry + "'");

  // Size line, after comments.
  while (true) {
    if (!std::getline(is, line)) throw ParseError(lineno + 1, "missing size line");
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    break;
  }
  std::istringstream ss(line);
  long long rows = -1, cols = -1, count = -1;
  if (!(ss >> rows >> cols >> count) || rows < 0 || cols < 0 || count < 0)
    throw ParseError(lineno, "malformed size line");

  CooMatrix m{static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), {}};
  m.entries.reserve(static_cast<std::size_t>(std::min<long long>(symmetric ? 2 * count : count, 1 << 20)));

  long long seen = 0;
  while (seen < count) {
    if (!std::getline(is, line))
      throw ParseError(lineno + 1, "expected " + std::to_string(count) + " entries, got " +
                                       std::to_string(seen));
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    std::istringstream es(line);
    long long i = 0, j = 0;
    if (!(es >> i >> j)) throw ParseError(lineno, "malformed entry");
    double v = 1.0;
    if (!pattern) {
      std::string tok;
      if (!(es >> tok)) throw ParseError(lineno, "missing value");
      std::size_t used = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError(lineno, "non-numeric value '" + tok + "'");
    }
    if (i < 1 || j < 1 || i > rows || j > cols)
      throw ParseError(lineno, "index out of range");
    auto r = static_cast<std::size_t>(i - 1), c = static_cast<std::size_t>(j - 1);
    m.entries.push_back({r, c, v});
    if (symmetric && r != c) m.entries.push_back({c, r, v});
    ++seen;
  }
  m.canonicalize();
  return m;
}

inline CooMatrix parse_matrix_market(const std::string& text) {
  std::istringstream is(text);
  return parse_matrix_market(is);
}

/// Writes a general real coordinate MatrixMarket file.
inline void write_matrix_market(std::ostream& os, const CsrMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.num_rows << ' ' << a.num_cols << ' ' << a.nnz() << '\n';
  auto old = os.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < a.num_rows; ++i)
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      os << i + 1 << ' ' << a.col_idx[k] + 1 << ' ' << a.values[k] << '\n';
  os.precision(old);
}

// -- Permutations applied to matrices --

/// Relabels rows and columns: entry (i, j, v) moves to (p[i], p[j], v).
inline CsrMatrix apply_symmetric_permutation(const CsrMatrix& a, const Permutation& p) {
  if (!a.square() || p.size() != a.num_rows)
    throw DimensionError("apply_symmetric_permutation: dimension mismatch");
  const auto inv = p.inverse();
  CsrMatrix out = CsrMatrix::zeros(a.num_rows, a.num_cols);
  for (std::size_t ni = 0; ni < a.num_rows; ++ni) {
    auto oi = inv[ni];
    out.row_ptr[ni + 1] = out.row_ptr[ni] + (a.row_ptr[oi + 1] - a.row_ptr[oi]);
  }
  out.col_idx.resize(a.nnz());
  out.values.resize(a.nnz());
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t ni = 0; ni < a.num_rows; ++ni) {
    auto oi = inv[ni];
    row.clear();
    for (auto k = a.row_ptr[oi]; k < a.row_ptr[oi + 1]; ++k)
      row.emplace_back(p[a.col_idx[k]], a.values[k]);
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    auto base = out.row_ptr[ni];
    for (std::size_t t = 0; t < row.size(); ++t) {
      out.col_idx[base + t] = row[t].first;
      out.values[base + t] = row[t].second;
    }
  }
  return out;
}

/// Row i of b moves to row p[i].
inline DenseMatrix apply_row_permutation(const DenseMatrix& b, const Permutation& p) {
  if (p.size() != b.num_rows) throw DimensionError("apply_row_permutation: dimension mismatch");
  DenseMatrix out(b.num_rows, b.num_cols);
  for (std::size_t i = 0; i < b.num_rows; ++i)
    std::copy_n(b.row(i), b.num_cols, out.row(p[i]));
  return out;
}

// -- Reference SpMM --

/// C = A·B with a row loop and double accumulators.
inline DenseMatrix spmm_oracle(const CsrMatrix& a, const DenseMatrix& b) {
  if (a.num_cols != b.num_rows) throw DimensionError("spmm_oracle: a.num_cols != b.num_rows");
  DenseMatrix c(a.num_rows, b.num_cols);
  for (std::size_t i = 0; i < a.num_rows; ++i) {
    double* ci = c.row(i);
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const double v = a.values[k];
      const double* bk = b.row(a.col_idx[k]);
      for (std::size_t j = 0; j < b.num_cols; ++j) ci[j] += v * bk[j];
    }
  }
  return c;
}

// -- Random generation --

/// Uniform double in [0, 1) with 53 random bits; stable across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t bound) {
  return static_cast<std::size_t>(rng() % bound);
}

inline Permutation random_permutation(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return Permutation(std::move(p));
}

/// Dense matrix with entries uniform in [-1, 1), rounded to float precision.
inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DenseMatrix d(rows, cols);
  for (auto& v : d.data) v = static_cast<double>(static_cast<float>(2.0 * uniform01(rng) - 1.0));
  return d;
}

/// Symmetric 0/1 adjacency of a planted-partition stochastic block model.
/// Vertex i belongs to block i / (n / blocks); no self loops.
inline CsrMatrix generate_sbm(std::size_t n, std::size_t blocks, double p_in, double p_out,
                              std::uint64_t seed) {
  if (blocks == 0 || n % blocks != 0)
    throw std::invalid_argument("generate_sbm: n must be divisible by blocks");
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0))
    throw std::invalid_argument("generate_sbm: require 0 <= p_out <= p_in <= 1");
  const std::size_t block_size = n / blocks;
  std::mt19937_64 rng(seed);
  CooMatrix coo{n, n, {}};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = (i / block_size == j / block_size) ? p_in : p_out;
      if (uniform01(rng) < p) {
        coo.entries.push_back({i, j, 1.0});
        coo.entries.push_back({j, i, 1.0});
      }
    }
  }
  coo.canonicalize();
  return coo_to_csr(coo);
}

} // namespace accspmm
