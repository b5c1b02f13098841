#pragma once

// Generators and brute-force oracles shared by the unit and acceptance tests.
// Nothing here calls into the planner or the store's query code.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "guide/topo_map.hpp"
#include "guide/vector_store.hpp"

namespace guide::oracle {

struct GenOptions {
  int min_nodes = 2;
  int max_nodes = 10;
  int grid = 5;
  double edge_prob = 0.55;
  double oneway_prob = 0.15;
  double node_tag_prob = 0.2;
  double edge_tag_prob = 0.1;
};

inline const std::vector<std::string>& tag_pool() {
  static const std::vector<std::string> pool = {"stairs", "noisy", "kitchen"};
  return pool;
}

// Nodes sit on distinct cells of an integer grid, so every edge is axis-aligned
// with an integer length and equal-length paths are common.
inline TopoMap random_grid_map(std::mt19937_64& rng, const GenOptions& opt = {}) {
  std::uniform_int_distribution<int> count(opt.min_nodes, opt.max_nodes);
  std::bernoulli_distribution coin_edge(opt.edge_prob), coin_oneway(opt.oneway_prob),
      coin_ntag(opt.node_tag_prob), coin_etag(opt.edge_tag_prob);
  std::uniform_int_distribution<std::size_t> pick_tag(0, tag_pool().size() - 1);
  std::uniform_int_distribution<int> spacing(1, 3);

  const int n = count(rng);
  std::vector<int> cells(opt.grid * opt.grid);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  cells.resize(n);

  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(std::string(1, static_cast<char>('A' + i)));
  std::shuffle(ids.begin(), ids.end(), rng);

  const int unit = spacing(rng);
  TopoMap map;
  std::vector<Coordinate> pos(n);
  for (int i = 0; i < n; ++i) {
    Node node;
    node.id = NodeId(ids[i]);
    pos[i] = {static_cast<double>((cells[i] % opt.grid) * unit), static_cast<double>((cells[i] / opt.grid) * unit)};
    node.position = pos[i];
    if (coin_ntag(rng)) node.tags.insert(tag_pool()[pick_tag(rng)]);
    map.add_node(std::move(node));
  }
  auto direction = [](Coordinate a, Coordinate b) {
    if (b.x > a.x) return 0;
    if (b.y > a.y) return 90;
    if (b.x < a.x) return 180;
    return 270;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (pos[i].x != pos[j].x && pos[i].y != pos[j].y) continue;
      if (!coin_edge(rng)) continue;
      const double d = std::abs(pos[i].x - pos[j].x) + std::abs(pos[i].y - pos[j].y);
      std::set<std::string> tags;
      if (coin_etag(rng)) tags.insert(tag_pool()[pick_tag(rng)]);
      const bool oneway = coin_oneway(rng);
      const bool forward_only = std::bernoulli_distribution(0.5)(rng);
      if (!oneway || forward_only) {
        map.add_edge(Edge{NodeId(ids[i]), NodeId(ids[j]), d, Heading::from_degrees(direction(pos[i], pos[j])), tags});
      }
      if (!oneway || !forward_only) {
        map.add_edge(Edge{NodeId(ids[j]), NodeId(ids[i]), d, Heading::from_degrees(direction(pos[j], pos[i])), tags});
      }
    }
  }
  return map;
}

struct Path {
  std::vector<NodeId> nodes;
  double distance = 0.0;
};

inline bool path_less(const Path& a, const Path& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.nodes < b.nodes;
}

inline bool shares_tag(const std::set<std::string>& tags, const std::set<std::string>& avoid) {
  return std::any_of(tags.begin(), tags.end(), [&](const std::string& t) { return avoid.contains(t); });
}

// Every simple path start -> goal, filtered by avoided tags (the start node is
// exempt) and optionally by the blocked flag. Sorted by (distance, node ids).
inline std::vector<Path> all_simple_paths(const TopoMap& map, const NodeId& start, const NodeId& goal,
                                          const std::set<std::string>& avoid = {}, bool skip_blocked = true) {
  std::vector<Path> out;
  Path cur{{start}, 0.0};
  std::set<NodeId> on_path{start};
  auto dfs = [&](auto&& self, const NodeId& at) -> void {
    if (at == goal) {
      out.push_back(cur);
      return;
    }
    for (const auto& [key, e] : map.edges()) {
      if (key.first != at) continue;
      if (on_path.contains(e.to)) continue;
      if (skip_blocked && e.blocked) continue;
      if (shares_tag(e.tags, avoid) || shares_tag(map.node(e.to).tags, avoid)) continue;
      on_path.insert(e.to);
      cur.nodes.push_back(e.to);
      cur.distance += e.distance;
      self(self, e.to);
      cur.distance -= e.distance;
      cur.nodes.pop_back();
      on_path.erase(e.to);
    }
  };
  if (start == goal) {
    out.push_back(cur);
  } else {
    dfs(dfs, start);
  }
  std::sort(out.begin(), out.end(), path_less);
  return out;
}

inline std::optional<Path> best_path(const TopoMap& map, const NodeId& start, const NodeId& goal,
                                     const std::set<std::string>& avoid = {}) {
  auto all = all_simple_paths(map, start, goal, avoid);
  if (all.empty()) return std::nullopt;
  return all.front();
}

// Directed simple cycles, each reported once starting from its smallest node.
inline std::vector<std::vector<NodeId>> simple_cycles(const TopoMap& map) {
  std::vector<std::vector<NodeId>> out;
  for (const auto& [root, _] : map.nodes()) {
    std::vector<NodeId> cur{root};
    std::set<NodeId> on{root};
    auto dfs = [&](auto&& self, const NodeId& at) -> void {
      for (const auto& [key, e] : map.edges()) {
        if (key.first != at) continue;
        if (e.to == root && cur.size() >= 2) {
          out.push_back(cur);
          continue;
        }
        if (e.to < root || on.contains(e.to)) continue;
        on.insert(e.to);
        cur.push_back(e.to);
        self(self, e.to);
        cur.pop_back();
        on.erase(e.to);
      }
    };
    dfs(dfs, root);
  }
  return out;
}

// Plain cosine in long double for the store oracle.
inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

inline Embedding random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = g(rng);
  return normalized(std::move(v));
}

}  // namespace guide::oracle
