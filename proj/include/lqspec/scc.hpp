#pragma once

#include <algorithm>
#include <set>
#include <vector>

namespace lqspec {

struct Condensation {
  // component[v] in 0..count-1, numbered by the smallest vertex they contain.
  std::vector<int> component;
  int count = 0;
  // dag[c] = components reachable from c by one edge, c itself excluded.
  std::vector<std::set<int>> dag;
  // has_cycle[c]: more than one vertex, or a self-loop.
  std::vector<bool> has_cycle;
};

// Iterative Tarjan over adjacency lists.
inline Condensation condense(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), raw(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  int next_index = 0, raw_count = 0;

  struct Frame {
    int v;
    std::size_t child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.child < adj[f.v].size()) {
        int w = adj[f.v][f.child++];
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      int v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          raw[w] = raw_count;
        } while (w != v);
        ++raw_count;
      }
    }
  }

  Condensation out;
  out.count = raw_count;
  std::vector<int> renumber(raw_count, -1);
  int next = 0;
  for (int v = 0; v < n; ++v)
    if (renumber[raw[v]] == -1) renumber[raw[v]] = next++;
  out.component.resize(n);
  for (int v = 0; v < n; ++v) out.component[v] = renumber[raw[v]];

  out.dag.assign(raw_count, {});
  out.has_cycle.assign(raw_count, false);
  std::vector<int> size(raw_count, 0);
  for (int v = 0; v < n; ++v) ++size[out.component[v]];
  for (int v = 0; v < n; ++v) {
    int cv = out.component[v];
    if (size[cv] > 1) out.has_cycle[cv] = true;
    for (int w : adj[v]) {
      int cw = out.component[w];
      if (cw == cv) {
        if (w == v) out.has_cycle[cv] = true;
      } else {
        out.dag[cv].insert(cw);
      }
    }
  }
  return out;
}

// Topological order of a condensation DAG (sources first).
inline std::vector<int> topological_order(const std::vector<std::set<int>>& dag) {
  const int n = static_cast<int>(dag.size());
  std::vector<int> indeg(n, 0), order;
  for (const auto& out : dag)
    for (int w : out) ++indeg[w];
  std::vector<int> ready;
  for (int c = n - 1; c >= 0; --c)
    if (indeg[c] == 0) ready.push_back(c);
  while (!ready.empty()) {
    int c = ready.back();
    ready.pop_back();
    order.push_back(c);
    for (int w : dag[c])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  return order;
}

}  // namespace lqspec
