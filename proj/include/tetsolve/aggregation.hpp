#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "tetsolve/block_csr.hpp"
#include "tetsolve/prolongation.hpp"

namespace tetsolve {

/// Partition of the first-order nodes into connected aggregates.
struct Aggregation {
  std::vector<int32_t> agg_of_node;
  int32_t n_aggregates = 0;
  std::vector<int32_t> seeds; // seed node of each aggregate, in creation order
};

/// Greedy aggregation over the block connectivity graph: unaggregated nodes
/// are visited in ascending id; each seeds an aggregate that grows
/// breadth-first over unaggregated neighbours until target_size. Leftover
/// singletons are merged into the aggregate of their smallest neighbour.
inline Aggregation aggregate_p1(const BlockCsrMatrix<double>& a, int32_t target_size) {
  if (target_size < 2) throw ValidationError("aggregate_p1: target_size must be >= 2");
  const int32_t n = a.n_block_rows;
  Aggregation agg;
  agg.agg_of_node.assign(n, -1);

  std::vector<int32_t> members_scratch;
  std::vector<std::vector<int32_t>> members;
  std::vector<int32_t> seeds;

  for (int32_t seed = 0; seed < n; ++seed) {
    if (agg.agg_of_node[seed] >= 0) continue;
    const int32_t id = static_cast<int32_t>(members.size());
    members.push_back({seed});
    seeds.push_back(seed);
    agg.agg_of_node[seed] = id;
    std::deque<int32_t> frontier = {seed};
    while (!frontier.empty() && static_cast<int32_t>(members[id].size()) < target_size) {
      const int32_t node = frontier.front();
      frontier.pop_front();
      for (int32_t e = a.row_ptr[node];
           e < a.row_ptr[node + 1] && static_cast<int32_t>(members[id].size()) < target_size;
           ++e) {
        const int32_t nb = a.col_idx[e];
        if (nb == node || agg.agg_of_node[nb] >= 0) continue;
        agg.agg_of_node[nb] = id;
        members[id].push_back(nb);
        frontier.push_back(nb);
      }
    }
  }

  // merge singleton aggregates into an adjacent aggregate when one exists
  std::vector<int32_t> remap(members.size());
  for (size_t id = 0; id < members.size(); ++id) remap[id] = static_cast<int32_t>(id);
  for (size_t id = 0; id < members.size(); ++id) {
    if (members[id].size() != 1) continue;
    const int32_t node = members[id][0];
    int32_t target = -1;
    for (int32_t e = a.row_ptr[node]; e < a.row_ptr[node + 1]; ++e) {
      const int32_t nb = a.col_idx[e];
      if (nb == node) continue;
      const int32_t other = agg.agg_of_node[nb];
      if (other != static_cast<int32_t>(id) && members[remap[other]].size() > 0) {
        target = remap[other];
        break;
      }
    }
    if (target >= 0) {
      members[target].push_back(node);
      agg.agg_of_node[node] = target;
      remap[id] = target;
      members[id].clear();
    }
  }

  // compact aggregate ids, preserving creation order
  std::vector<int32_t> compact(members.size(), -1);
  for (size_t id = 0; id < members.size(); ++id)
    if (!members[id].empty()) {
      compact[id] = agg.n_aggregates++;
      agg.seeds.push_back(seeds[id]);
    }
  for (int32_t node = 0; node < n; ++node)
    agg.agg_of_node[node] = compact[agg.agg_of_node[node]];
  return agg;
}

/// Piecewise-constant (unsmoothed aggregation) prolongation plus the Galerkin
/// coarse matrix A2 = P^T K1 P in block-CSR. Constrained fine dofs are dropped
/// before the product; coarse dofs whose fine support is entirely constrained
/// get identity rows. fine_mask may be empty.
inline std::pair<Prolongation, BlockCsrMatrix<double>> build_level2(
    const BlockCsrMatrix<double>& k1, const Aggregation& agg,
    const std::vector<uint8_t>& fine_mask = {}) {
  const int32_t n_fine = k1.n_block_rows;
  if (static_cast<int32_t>(agg.agg_of_node.size()) != n_fine)
    throw ValidationError("build_level2: aggregation size mismatch");
  if (agg.n_aggregates < 1) throw ValidationError("build_level2: empty aggregation");
  std::vector<int32_t> count(agg.n_aggregates, 0);
  for (int32_t v : agg.agg_of_node) {
    if (v < 0 || v >= agg.n_aggregates) throw ValidationError("build_level2: node without aggregate");
    ++count[v];
  }
  for (int32_t c : count)
    if (c == 0) throw ValidationError("build_level2: empty aggregate");

  Prolongation p;
  p.kind = Prolongation::Kind::aggregation_l2_to_l1;
  p.n_fine_nodes = n_fine;
  p.n_coarse_nodes = agg.n_aggregates;
  p.row_ptr.resize(n_fine + 1);
  p.cols.resize(n_fine);
  p.weights.assign(n_fine, 1.0);
  for (int32_t fn = 0; fn < n_fine; ++fn) {
    p.row_ptr[fn] = fn;
    p.cols[fn] = agg.agg_of_node[fn];
  }
  p.row_ptr[n_fine] = n_fine;

  // coarse pattern: aggregate pairs connected through any fine block
  std::vector<std::vector<int32_t>> adj(agg.n_aggregates);
  for (int32_t r = 0; r < n_fine; ++r)
    for (int32_t e = k1.row_ptr[r]; e < k1.row_ptr[r + 1]; ++e)
      adj[agg.agg_of_node[r]].push_back(agg.agg_of_node[k1.col_idx[e]]);

  BlockCsrMatrix<double> a2;
  a2.n_block_rows = agg.n_aggregates;
  a2.row_ptr.assign(agg.n_aggregates + 1, 0);
  for (int32_t r = 0; r < agg.n_aggregates; ++r) {
    auto& row = adj[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    a2.row_ptr[r + 1] = a2.row_ptr[r] + static_cast<int32_t>(row.size());
  }
  for (int32_t r = 0; r < agg.n_aggregates; ++r)
    a2.col_idx.insert(a2.col_idx.end(), adj[r].begin(), adj[r].end());
  a2.blocks.assign(a2.col_idx.size(), std::array<double, 9>{});

  auto entry_of = [&](int32_t r, int32_t c) {
    auto lo = a2.col_idx.begin() + a2.row_ptr[r], hi = a2.col_idx.begin() + a2.row_ptr[r + 1];
    return static_cast<size_t>(std::lower_bound(lo, hi, c) - a2.col_idx.begin());
  };

  for (int32_t r = 0; r < n_fine; ++r) {
    const int32_t cr = agg.agg_of_node[r];
    for (int32_t e = k1.row_ptr[r]; e < k1.row_ptr[r + 1]; ++e) {
      const int32_t c = k1.col_idx[e];
      auto& dst = a2.blocks[entry_of(cr, agg.agg_of_node[c])];
      const auto& src = k1.blocks[e];
      for (int i = 0; i < 3; ++i) {
        if (!fine_mask.empty() && fine_mask[3 * r + i]) continue;
        for (int j = 0; j < 3; ++j) {
          if (!fine_mask.empty() && fine_mask[3 * c + j]) continue;
          dst[3 * i + j] += src[3 * i + j];
        }
      }
    }
  }

  // coarse dofs with no surviving stiffness become identity rows
  for (int32_t r = 0; r < agg.n_aggregates; ++r) {
    auto& diag = a2.blocks[entry_of(r, r)];
    for (int i = 0; i < 3; ++i)
      if (diag[4 * i] == 0.0) diag[4 * i] = 1.0;
  }
  return {std::move(p), std::move(a2)};
}

/// Coarse-level constraint mask: a coarse dof is constrained when every fine
/// node of its aggregate is constrained on that axis.
inline std::vector<uint8_t> coarse_mask(const Aggregation& agg,
                                        const std::vector<uint8_t>& fine_mask) {
  std::vector<uint8_t> out(static_cast<size_t>(3) * agg.n_aggregates, 1);
  if (fine_mask.empty()) {
    std::fill(out.begin(), out.end(), 0);
    return out;
  }
  for (size_t node = 0; node < agg.agg_of_node.size(); ++node)
    for (int i = 0; i < 3; ++i)
      if (!fine_mask[3 * node + i]) out[3 * static_cast<size_t>(agg.agg_of_node[node]) + i] = 0;
  return out;
}

} // namespace tetsolve
