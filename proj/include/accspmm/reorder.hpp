#pragma once

//
// ... Standard header files
//
#include <algorithm>
#include <chrono>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

//
// ... accspmm header files
//
#include <accspmm/core.hpp>

namespace accspmm {

/// Thrown when a graph has no edges, so modularity is undefined.
class EmptyGraphError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

struct Neighbor {
  std::size_t vertex = 0;
  double weight = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Undirected weighted graph over the rows of a square matrix.
/// Adjacency lists are sorted by neighbor and carry no self loops.
struct AffinityGraph {
  std::size_t n = 0;
  std::vector<std::vector<Neighbor>> adjacency;
  std::vector<double> degree;
  double total_weight_2m = 0.0;

  friend bool operator==(const AffinityGraph&, const AffinityGraph&) = default;
};

/// Pattern of A ∨ Aᵀ with unit weights; diagonal entries are dropped.
inline AffinityGraph build_affinity_graph(const CsrMatrix& a) {
  if (!a.square()) throw DimensionError("build_affinity_graph: matrix is not square");
  const std::size_t n = a.num_rows;
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      auto j = a.col_idx[k];
      if (i == j) continue;
      nbrs[i].push_back(j);
      nbrs[j].push_back(i);
    }
  }
  AffinityGraph g;
  g.n = n;
  g.adjacency.resize(n);
  g.degree.assign(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    auto& l = nbrs[v];
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
    g.adjacency[v].reserve(l.size());
    for (auto u : l) g.adjacency[v].push_back({u, 1.0});
    g.degree[v] = static_cast<double>(l.size());
    g.total_weight_2m += g.degree[v];
  }
  return g;
}

/// Global modularity Q of an assignment of vertices to community labels.
inline double modularity(const AffinityGraph& g, const std::vector<std::size_t>& community_of) {
  if (community_of.size() != g.n) throw DimensionError("modularity: assignment size mismatch");
  if (g.total_weight_2m <= 0.0) throw EmptyGraphError("modularity: graph has no edges");

  // Compact labels so the sums below run in label order.
  std::vector<std::size_t> labels(community_of);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  auto slot = [&](std::size_t c) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), c) -
                                    labels.begin());
  };
  std::vector<double> internal(labels.size(), 0.0), total(labels.size(), 0.0);
  for (std::size_t v = 0; v < g.n; ++v) {
    auto cv = community_of[v];
    auto s = slot(cv);
    total[s] += g.degree[v];
    for (const auto& e : g.adjacency[v])
      if (community_of[e.vertex] == cv) internal[s] += e.weight;
  }
  const double m2 = g.total_weight_2m;
  double q = 0.0;
  for (std::size_t s = 0; s < labels.size(); ++s)
    q += internal[s] / m2 - (total[s] / m2) * (total[s] / m2);
  return q;
}

/// Running per-community aggregates for agglomerative merging. Each
/// community is named by its root vertex; link weights form the coarsened
/// graph between roots.
class CommunityState {
public:
  explicit CommunityState(const AffinityGraph& g)
      : parent_(g.n), internal_(g.n, 0.0), total_(g.degree), links_(g.n) {
    for (std::size_t v = 0; v < g.n; ++v) {
      parent_[v] = v;
      for (const auto& e : g.adjacency[v]) links_[v][e.vertex] += e.weight;
    }
  }

  std::size_t size() const noexcept { return parent_.size(); }

  std::size_t community_of(std::size_t v) const {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  bool is_root(std::size_t v) const { return parent_[v] == v; }

  std::vector<std::size_t> assignment() const {
    std::vector<std::size_t> a(size());
    for (std::size_t v = 0; v < size(); ++v) a[v] = community_of(v);
    return a;
  }

  /// Σ A_ij over ordered pairs inside the community.
  double internal_weight(std::size_t root) const { return internal_[root]; }
  double total_degree(std::size_t root) const { return total_[root]; }

  /// Σ A_ij over i in community a, j in community b.
  double link_weight(std::size_t a, std::size_t b) const {
    auto it = links_[a].find(b);
    return it == links_[a].end() ? 0.0 : it->second;
  }

  const std::unordered_map<std::size_t, double>& links(std::size_t root) const {
    return links_[root];
  }

  /// Folds community `child` into community `parent`; both must be roots.
  void merge(std::size_t child, std::size_t parent) {
    if (child == parent || !is_root(child) || !is_root(parent))
      throw std::invalid_argument("CommunityState::merge: arguments must be distinct roots");
    const double w = link_weight(child, parent);
    internal_[parent] += internal_[child] + 2.0 * w;
    total_[parent] += total_[child];
    for (const auto& [x, wx] : links_[child]) {
      if (x == parent) {
        links_[parent].erase(child);
        continue;
      }
      links_[x].erase(child);
      links_[x][parent] += wx;
      links_[parent][x] += wx;
    }
    links_[child].clear();
    internal_[child] = 0.0;
    total_[child] = 0.0;
    parent_[child] = parent;
  }

private:
  mutable std::vector<std::size_t> parent_;
  std::vector<double> internal_;
  std::vector<double> total_;
  std::vector<std::unordered_map<std::size_t, double>> links_;
};

/// Change in global modularity from merging community(v) into community(u).
/// O(1): only the link weight and the two total degrees are needed.
inline double delta_q(const AffinityGraph& g, const CommunityState& state, std::size_t u,
                      std::size_t v) {
  if (g.total_weight_2m <= 0.0) throw EmptyGraphError("delta_q: graph has no edges");
  const auto cu = state.community_of(u), cv = state.community_of(v);
  if (cu == cv) throw std::invalid_argument("delta_q: vertices already share a community");
  const double m2 = g.total_weight_2m;
  const double w = state.link_weight(cu, cv);
  return 2.0 * (w / m2 - state.total_degree(cu) * state.total_degree(cv) / (m2 * m2));
}

// -- Dendrogram --

struct Merge {
  std::size_t child = 0;
  std::size_t parent = 0;
  double gain = 0.0;  ///< delta_q at the time of the merge

  friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
  std::vector<Merge> merges;
  std::vector<std::size_t> community_of;        ///< root per vertex
  std::vector<std::vector<std::size_t>> children;  ///< per vertex, merge-record order
  std::size_t passes = 0;

  std::size_t size() const noexcept { return community_of.size(); }

  std::vector<std::size_t> roots() const {
    std::vector<std::size_t> r;
    for (std::size_t v = 0; v < size(); ++v)
      if (community_of[v] == v) r.push_back(v);
    return r;
  }

  /// Pre-order DFS: roots ascending, children in merge-record order.
  std::vector<std::size_t> dfs_order() const {
    std::vector<std::size_t> order;
    order.reserve(size());
    std::vector<std::size_t> stack;
    for (auto r : roots()) {
      stack.push_back(r);
      while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        order.push_back(v);
        for (auto it = children[v].rbegin(); it != children[v].rend(); ++it)
          stack.push_back(*it);
      }
    }
    return order;
  }

  /// Builds a dendrogram from a merge record; rejects records that are not a forest.
  static Dendrogram from_merges(std::size_t n, std::vector<Merge> merges) {
    Dendrogram d;
    d.children.resize(n);
    std::vector<std::size_t> parent(n);
    for (std::size_t v = 0; v < n; ++v) parent[v] = v;
    for (const auto& m : merges) {
      if (m.child >= n || m.parent >= n || m.child == m.parent)
        throw std::invalid_argument("dendrogram: merge out of range");
      if (parent[m.child] != m.child || parent[m.parent] != m.parent)
        throw std::invalid_argument("dendrogram: merges must join two roots");
      parent[m.child] = m.parent;
      d.children[m.parent].push_back(m.child);
    }
    d.community_of.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      auto r = v;
      while (parent[r] != r) r = parent[r];
      d.community_of[v] = r;
    }
    d.merges = std::move(merges);
    return d;
  }
};

struct DendrogramOptions {
  std::size_t max_passes = 10;
};

/// Agglomerative modularity merging. Each pass visits the live communities
/// in ascending order of degree (ties by id) and folds each into the
/// neighbouring community with the largest positive gain (ties by smallest
/// id). Passes repeat until one accepts no merge or the pass limit is hit.
inline Dendrogram build_dendrogram(const AffinityGraph& g, DendrogramOptions opts = {}) {
  std::vector<Merge> merges;
  std::size_t passes = 0;
  if (g.total_weight_2m > 0.0) {
    CommunityState state(g);
    std::vector<std::size_t> live;
    for (std::size_t pass = 0; pass < opts.max_passes; ++pass) {
      live.clear();
      for (std::size_t v = 0; v < g.n; ++v)
        if (state.is_root(v)) live.push_back(v);
      std::sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) {
        auto da = state.total_degree(a), db = state.total_degree(b);
        return da != db ? da < db : a < b;
      });
      ++passes;
      std::size_t accepted = 0;
      for (auto v : live) {
        if (!state.is_root(v)) continue;
        constexpr auto none = std::numeric_limits<std::size_t>::max();
        std::size_t best = none;
        double best_gain = 0.0;
        for (const auto& link : state.links(v)) {
          const auto u = link.first;
          const double gain = delta_q(g, state, u, v);
          if (best == none || gain > best_gain || (gain == best_gain && u < best)) {
            best = u;
            best_gain = gain;
          }
        }
        if (best == none || !(best_gain > 0.0)) continue;
        state.merge(v, best);
        merges.push_back({v, best, best_gain});
        ++accepted;
      }
      if (accepted == 0) break;
    }
  }
  auto d = Dendrogram::from_merges(g.n, std::move(merges));
  d.passes = passes;
  return d;
}

/// Locality-driven numbering. Walks the dendrogram in DFS order; after each
/// numbered vertex it chases the unvisited vertex of the same community
/// sharing the most neighbours with it (ties by DFS position), falling back
/// to the next unvisited DFS vertex when no candidate shares any.
inline Permutation generate_ordering(const AffinityGraph& g, const Dendrogram& d) {
  if (d.size() != g.n) throw DimensionError("generate_ordering: dendrogram size mismatch");
  const auto order = d.dfs_order();
  std::vector<std::size_t> pos(g.n);
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;

  std::vector<std::size_t> old_to_new(g.n);
  std::vector<char> visited(g.n, 0);
  std::vector<std::size_t> common(g.n, 0);
  std::vector<std::size_t> touched;
  std::size_t next = 0;

  for (auto start : order) {
    if (visited[start]) continue;
    auto v = start;
    while (true) {
      old_to_new[v] = next++;
      visited[v] = 1;

      // Candidates sharing a neighbour are exactly the vertices two hops away.
      const auto root = d.community_of[v];
      touched.clear();
      for (const auto& x : g.adjacency[v]) {
        for (const auto& w : g.adjacency[x.vertex]) {
          auto c = w.vertex;
          if (c == v || visited[c] || d.community_of[c] != root) continue;
          if (common[c]++ == 0) touched.push_back(c);
        }
      }
      std::size_t best = v;
      for (auto c : touched) {
        if (best == v || common[c] > common[best] ||
            (common[c] == common[best] && pos[c] < pos[best]))
          best = c;
      }
      for (auto c : touched) common[c] = 0;
      if (best == v) break;
      v = best;
    }
  }
  return Permutation(std::move(old_to_new));
}

struct ReorderStats {
  std::size_t passes = 0;
  std::size_t merges_accepted = 0;
  std::size_t communities = 0;
  double final_modularity = 0.0;  ///< 0 when the graph has no edges
  std::chrono::duration<double> elapsed{};
};

struct ReorderResult {
  CsrMatrix matrix;
  Permutation permutation;
  ReorderStats stats;
};

/// Relabels a square matrix so that rows sharing a community, and within it
/// rows sharing neighbours, become adjacent. Edgeless inputs map to identity.
inline ReorderResult reorder(const CsrMatrix& a, DendrogramOptions opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto g = build_affinity_graph(a);
  ReorderResult r;
  if (g.total_weight_2m <= 0.0) {
    r.matrix = a;
    r.permutation = Permutation::identity(a.num_rows);
    r.stats.communities = a.num_rows;
  } else {
    auto d = build_dendrogram(g, opts);
    r.permutation = generate_ordering(g, d);
    r.matrix = apply_symmetric_permutation(a, r.permutation);
    r.stats.passes = d.passes;
    r.stats.merges_accepted = d.merges.size();
    r.stats.communities = d.roots().size();
    r.stats.final_modularity = modularity(g, d.community_of);
  }
  r.stats.elapsed = std::chrono::steady_clock::now() - t0;
  return r;
}

} // namespace accspmm
