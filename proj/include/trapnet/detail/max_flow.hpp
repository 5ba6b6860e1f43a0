#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace trapnet::detail {

/// Dinic max-flow on real capacities. Residual capacities at or below `eps`
/// count as saturated.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t nodes, double eps = 0.0) : graph_(nodes), level_(nodes), iter_(nodes), eps_(eps) {}

  void add_edge(std::size_t from, std::size_t to, double cap) {
    graph_[from].push_back({to, cap, graph_[to].size()});
    graph_[to].push_back({from, 0.0, graph_[from].size() - 1});
  }

  double run(std::size_t s, std::size_t t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      std::fill(iter_.begin(), iter_.end(), 0);
      double f;
      while ((f = dfs(s, t, std::numeric_limits<double>::infinity())) > eps_) flow += f;
    }
    return flow;
  }

  /// Nodes reachable from s in the residual graph after run().
  std::vector<char> source_side(std::size_t s) const {
    std::vector<char> seen(graph_.size(), 0);
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (const auto& e : graph_[v]) {
        if (e.cap > eps_ && !seen[e.to]) {
          seen[e.to] = 1;
          stack.push_back(e.to);
        }
      }
    }
    return seen;
  }

 private:
  struct Arc {
    std::size_t to;
    double cap;
    std::size_t rev;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      auto v = q.front();
      q.pop();
      for (const auto& e : graph_[v]) {
        if (e.cap > eps_ && level_[e.to] < 0) {
          level_[e.to] = level_[v] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(std::size_t v, std::size_t t, double f) {
    if (v == t) return f;
    for (auto& i = iter_[v]; i < graph_[v].size(); ++i) {
      Arc& e = graph_[v][i];
      if (e.cap > eps_ && level_[v] < level_[e.to]) {
        const double d = dfs(e.to, t, std::min(f, e.cap));
        if (d > eps_) {
          e.cap -= d;
          graph_[e.to][e.rev].cap += d;
          return d;
        }
      }
    }
    return 0.0;
  }

  std::vector<std::vector<Arc>> graph_;
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
  double eps_;
};

}  // namespace trapnet::detail
