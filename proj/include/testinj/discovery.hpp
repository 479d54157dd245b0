#pragma once

// Constraint-based structure learning: PC (CPDAG) and FCI (PAG).
//
// Everything runs in a fixed order: edges by (name, name), candidate
// conditioning sets in lexicographic order of node names. The skeleton
// search is order-independent within a conditioning size: adjacency sets
// are frozen at the start of each size and removals applied at its end.

#include <algorithm>
#include <chrono>
#include <concepts>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "testinj/citest.hpp"
#include "testinj/dataset.hpp"
#include "testinj/error.hpp"
#include "testinj/graph.hpp"

namespace testinj {

template <class T>
concept IndependenceSource = requires(T& t, std::size_t x, std::size_t y, std::span<const std::size_t> z) {
  { t(x, y, z) } -> std::convertible_to<bool>;
};

// Answers independence queries by d-separation in a known DAG. `observed`
// maps query indices to DAG nodes; unlisted DAG nodes are latent.
class DSeparationOracle {
 public:
  explicit DSeparationOracle(const Dag& dag) : dag_(&dag) {
    for (std::size_t i = 0; i < dag.size(); ++i) observed_.push_back(i);
  }
  DSeparationOracle(const Dag& dag, std::vector<std::size_t> observed)
      : dag_(&dag), observed_(std::move(observed)) {}

  bool operator()(std::size_t x, std::size_t y, std::span<const std::size_t> z) {
    ++queries_;
    std::vector<std::size_t> zz;
    zz.reserve(z.size());
    for (auto v : z) zz.push_back(observed_[v]);
    return d_separated(*dag_, observed_[x], observed_[y], zz);
  }

  std::vector<std::string> observed_names() const {
    std::vector<std::string> out;
    for (auto v : observed_) out.push_back(dag_->names()[v]);
    return out;
  }

  std::size_t queries() const { return queries_; }

 private:
  const Dag* dag_;
  std::vector<std::size_t> observed_;
  std::size_t queries_ = 0;
};

enum class Algorithm { PC, FCI };

inline std::string_view algorithm_name(Algorithm a) { return a == Algorithm::PC ? "pc" : "fci"; }

struct DiscoveryConfig {
  double alpha = 0.05;
  Algorithm algorithm = Algorithm::FCI;
  std::optional<std::size_t> max_conditioning_size;  // unset: unlimited up to 10 variables, else 3
  std::size_t possible_dsep_max_size = 4;
  CIStatistic statistic = CIStatistic::GSquared;

  void validate() const { validate_alpha(alpha); }

  std::size_t conditioning_limit(std::size_t variables) const {
    if (max_conditioning_size) return *max_conditioning_size;
    return variables <= 10 ? variables : 3;
  }
};

// Separating set per removed edge, keyed by the ordered index pair.
class SepsetStore {
 public:
  void set(std::size_t a, std::size_t b, std::vector<std::size_t> z) {
    std::sort(z.begin(), z.end());
    sets_[key(a, b)] = std::move(z);
  }

  const std::vector<std::size_t>* get(std::size_t a, std::size_t b) const {
    auto it = sets_.find(key(a, b));
    return it == sets_.end() ? nullptr : &it->second;
  }

  bool contains(std::size_t a, std::size_t b, std::size_t v) const {
    const auto* s = get(a, b);
    return s && std::find(s->begin(), s->end(), v) != s->end();
  }

  bool has(std::size_t a, std::size_t b) const { return get(a, b) != nullptr; }
  const std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>& all() const { return sets_; }
  bool operator==(const SepsetStore&) const = default;

 private:
  static std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b) {
    return {std::min(a, b), std::max(a, b)};
  }
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> sets_;
};

struct DiscoveryReport {
  std::vector<std::pair<std::string, std::size_t>> stage_edges;
  std::map<std::string, std::size_t> rule_firings;
  std::vector<std::string> conflicts;
  SepsetStore sepsets;
  std::size_t tests = 0;
  double wall_seconds = 0;

  void stage(const std::string& name, const MixedGraph& g) { stage_edges.emplace_back(name, g.edge_count()); }
};

namespace discovery_detail {

// Node indices sorted by name.
inline std::vector<std::size_t> name_order(const std::vector<std::string>& names) {
  std::vector<std::size_t> order(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return names[a] < names[b]; });
  return order;
}

// Calls f(subset) for every k-subset of `items` in lexicographic position
// order; stops early when f returns true.
template <class F>
bool for_each_subset(const std::vector<std::size_t>& items, std::size_t k, F&& f) {
  if (k > items.size()) return false;
  std::vector<std::size_t> pos(k);
  for (std::size_t i = 0; i < k; ++i) pos[i] = i;
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = items[pos[i]];
    if (f(std::span<const std::size_t>(subset))) return true;
    std::size_t i = k;
    while (i > 0 && pos[i - 1] == items.size() - k + i - 1) --i;
    if (i == 0) return false;
    ++pos[i - 1];
    for (std::size_t j = i; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
}

// Applies orientations while respecting marks fixed by background knowledge.
// Overwriting a non-circle mark is a conflict: an arrowhead still goes in
// (bidirected result), anything else is refused. Both are reported.
class Orienter {
 public:
  Orienter(MixedGraph& g, DiscoveryReport* report) : g_(g), report_(report) {}

  void lock(std::size_t from, std::size_t to) { locked_.insert({from, to}); }
  bool locked(std::size_t from, std::size_t to) const { return locked_.count({from, to}) != 0; }

  void force(const std::vector<ForcedMark>& marks) {
    for (const auto& f : marks) {
      g_.set_mark(f.from, f.to, f.mark);
      lock(f.from, f.to);
    }
  }

  // Sets the mark at `to` on from-to; returns true if the graph changed.
  bool set(std::size_t from, std::size_t to, Mark m, const char* rule) {
    Mark cur = g_.mark_at(from, to);
    if (cur == m) return false;
    if (locked(from, to)) {
      conflict(rule, from, to, "background knowledge keeps existing mark");
      return false;
    }
    if (cur != Mark::Circle) {
      if (m != Mark::Arrow) {
        conflict(rule, from, to, "refused to replace a fixed mark");
        return false;
      }
      conflict(rule, from, to, "arrowhead over a fixed mark");
    }
    g_.set_mark(from, to, m);
    return true;
  }

  void fired(const char* rule) {
    if (report_) ++report_->rule_firings[rule];
  }

  void conflict(const char* rule, std::size_t from, std::size_t to, const char* what) {
    if (report_)
      report_->conflicts.push_back(std::string(rule) + ": " + g_.name(from) + " - " + g_.name(to) +
                                   " (mark at " + g_.name(to) + "): " + what);
  }

  MixedGraph& graph() { return g_; }

 private:
  MixedGraph& g_;
  DiscoveryReport* report_;
  std::set<std::pair<std::size_t, std::size_t>> locked_;
};

}  // namespace discovery_detail

// Adjacency search from the complete graph. All surviving edges are o-o.
template <IndependenceSource Indep>
std::pair<MixedGraph, SepsetStore> skeleton(const std::vector<std::string>& names, Indep& indep,
                                            const DiscoveryConfig& config,
                                            DiscoveryReport* report = nullptr) {
  if (names.size() < 2) throw ValidationError("discovery needs at least two variables");
  MixedGraph g = MixedGraph::complete(names, Mark::Circle);
  SepsetStore seps;
  const auto order = discovery_detail::name_order(names);
  std::vector<std::size_t> rank(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  const std::size_t limit = config.conditioning_limit(names.size());

  for (std::size_t k = 0; k <= limit; ++k) {
    std::vector<std::vector<std::size_t>> adj(names.size());
    for (std::size_t v = 0; v < names.size(); ++v) {
      for (auto w : order)
        if (g.adjacent(v, w)) adj[v].push_back(w);
    }
    bool any_large = false;
    std::vector<std::pair<std::size_t, std::size_t>> removals;
    for (const auto& e : g.edges()) {
      std::set<std::vector<std::size_t>> tried;
      bool removed = false;
      for (auto [a, b] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
        std::vector<std::size_t> cand;
        for (auto w : adj[a])
          if (w != b) cand.push_back(w);
        if (cand.size() < k) continue;
        any_large = true;
        removed = discovery_detail::for_each_subset(cand, k, [&](std::span<const std::size_t> z) {
          std::vector<std::size_t> key(z.begin(), z.end());
          std::sort(key.begin(), key.end());
          if (!tried.insert(key).second) return false;
          if (report) ++report->tests;
          if (!indep(e.a, e.b, z)) return false;
          seps.set(e.a, e.b, {z.begin(), z.end()});
          return true;
        });
        if (removed) break;
      }
      if (removed) removals.emplace_back(e.a, e.b);
    }
    for (auto [a, b] : removals) g.remove_edge(a, b);
    if (!any_large) break;
  }
  if (report) report->stage("skeleton", g);
  return {std::move(g), std::move(seps)};
}

namespace discovery_detail {

inline void orient_colliders(Orienter& o, const SepsetStore& seps, bool flag_bidirected) {
  MixedGraph& g = o.graph();
  const auto order = name_order(g.names());
  for (auto z : order) {
    std::vector<std::size_t> nb;
    for (auto v : order)
      if (g.adjacent(z, v)) nb.push_back(v);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        const std::size_t x = nb[i], y = nb[j];
        if (g.adjacent(x, y) || seps.contains(x, y, z)) continue;
        for (auto end : {x, y}) {
          if (flag_bidirected && g.mark_at(z, end) == Mark::Arrow && g.mark_at(end, z) != Mark::Arrow)
            o.conflict("v-structure", end, z, "edge becomes bidirected");
          o.set(end, z, Mark::Arrow, "v-structure");
        }
        o.fired("v-structure");
      }
  }
}

}  // namespace discovery_detail

// Unshielded x - z - y with z outside sepset(x, y) gets arrowheads at z;
// far endpoints keep their marks.
inline MixedGraph orient_v_structures(MixedGraph g, const SepsetStore& seps,
                                      DiscoveryReport* report = nullptr) {
  discovery_detail::Orienter o(g, report);
  discovery_detail::orient_colliders(o, seps, false);
  return g;
}

namespace discovery_detail {

inline bool undirected(const MixedGraph& g, std::size_t a, std::size_t b) {
  return g.has_marks(a, b, Mark::Tail, Mark::Tail);
}

inline bool orient_pc(Orienter& o, std::size_t a, std::size_t b, const char* rule) {
  if (!o.set(a, b, Mark::Arrow, rule)) return false;
  o.fired(rule);
  return true;
}

// One pass of Meek's rules 1-4 over tail/arrow graphs.
inline bool meek_pass(Orienter& o) {
  MixedGraph& g = o.graph();
  const auto order = name_order(g.names());
  bool changed = false;
  for (auto a : order)
    for (auto b : order) {
      if (a == b || !undirected(g, a, b)) continue;
      // R1: c -> a - b, c and b nonadjacent.
      for (auto c : order)
        if (c != b && g.directed(c, a) && !g.adjacent(c, b)) {
          changed |= orient_pc(o, a, b, "meek-1");
          goto next;
        }
      // R2: a -> c -> b.
      for (auto c : order)
        if (g.directed(a, c) && g.directed(c, b)) {
          changed |= orient_pc(o, a, b, "meek-2");
          goto next;
        }
      // R3: a - c -> b, a - d -> b, c and d nonadjacent.
      for (auto c : order)
        for (auto d : order)
          if (c != d && undirected(g, a, c) && undirected(g, a, d) && g.directed(c, b) &&
              g.directed(d, b) && !g.adjacent(c, d)) {
            changed |= orient_pc(o, a, b, "meek-3");
            goto next;
          }
      // R4: a - d -> c -> b, a adjacent c, b and d nonadjacent.
      for (auto c : order)
        for (auto d : order)
          if (c != d && d != b && c != b && undirected(g, a, d) && g.adjacent(a, c) &&
              g.directed(d, c) && g.directed(c, b) && !g.adjacent(b, d)) {
            changed |= orient_pc(o, a, b, "meek-4");
            goto next;
          }
    next:;
    }
  return changed;
}

}  // namespace discovery_detail

inline MixedGraph meek_rules(MixedGraph g, DiscoveryReport* report = nullptr) {
  discovery_detail::Orienter o(g, report);
  while (discovery_detail::meek_pass(o)) {
  }
  return g;
}

// ---------------------------------------------------------------------------
// FCI

namespace discovery_detail {

// Nodes reachable from x along paths where every interior node is a
// collider on the path or the middle of a triangle.
inline std::vector<std::size_t> possible_dsep(const MixedGraph& g, std::size_t x) {
  const std::size_t n = g.size();
  std::vector<bool> in(n);
  std::set<std::pair<std::size_t, std::size_t>> seen;  // (previous, current)
  std::deque<std::pair<std::size_t, std::size_t>> queue;
  for (auto v : g.neighbors(x)) {
    in[v] = true;
    seen.insert({x, v});
    queue.emplace_back(x, v);
  }
  while (!queue.empty()) {
    auto [prev, cur] = queue.front();
    queue.pop_front();
    for (auto next : g.neighbors(cur)) {
      if (next == prev || next == x) continue;
      bool collider = g.mark_at(prev, cur) == Mark::Arrow && g.mark_at(next, cur) == Mark::Arrow;
      bool triangle = g.adjacent(prev, next);
      if (!collider && !triangle) continue;
      if (!seen.insert({cur, next}).second) continue;
      in[next] = true;
      queue.emplace_back(cur, next);
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < n; ++v)
    if (in[v] && v != x) out.push_back(v);
  return out;
}

inline bool arrow_at(const MixedGraph& g, std::size_t from, std::size_t to) {
  return g.adjacent(from, to) && g.mark_at(from, to) == Mark::Arrow;
}
inline bool circle_at(const MixedGraph& g, std::size_t from, std::size_t to) {
  return g.adjacent(from, to) && g.mark_at(from, to) == Mark::Circle;
}
inline bool tail_at(const MixedGraph& g, std::size_t from, std::size_t to) {
  return g.adjacent(from, to) && g.mark_at(from, to) == Mark::Tail;
}

// Edge a-b could be oriented a -> b.
inline bool potentially_directed(const MixedGraph& g, std::size_t a, std::size_t b) {
  return g.adjacent(a, b) && g.mark_at(b, a) != Mark::Arrow && g.mark_at(a, b) != Mark::Tail;
}

// Uncovered potentially directed paths from `from` to `to`; calls f(path)
// until it returns true.
template <class F>
bool uncovered_pd_paths(const MixedGraph& g, std::size_t from, std::size_t to, F&& f) {
  std::vector<std::size_t> path{from};
  std::vector<bool> on(g.size());
  on[from] = true;
  std::function<bool()> dfs = [&]() -> bool {
    std::size_t cur = path.back();
    for (std::size_t next = 0; next < g.size(); ++next) {
      if (on[next] || !potentially_directed(g, cur, next)) continue;
      if (path.size() >= 2 && g.adjacent(path[path.size() - 2], next)) continue;
      path.push_back(next);
      if (next == to) {
        bool stop = f(path);
        path.pop_back();
        if (stop) return true;
        continue;
      }
      on[next] = true;
      bool stop = dfs();
      on[next] = false;
      path.pop_back();
      if (stop) return true;
    }
    return false;
  };
  return dfs();
}

struct FciRules {
  Orienter& o;
  const SepsetStore& seps;
  std::vector<std::size_t> order;

  MixedGraph& g() { return o.graph(); }

  bool apply(std::size_t from, std::size_t to, Mark m, const char* rule) {
    if (!o.set(from, to, m, rule)) return false;
    o.fired(rule);
    return true;
  }

  // R1: a *-> b o-* c, a and c nonadjacent => b -> c.
  bool r1() {
    bool changed = false;
    for (auto b : order)
      for (auto c : order) {
        if (!circle_at(g(), c, b)) continue;
        for (auto a : order)
          if (a != c && arrow_at(g(), a, b) && !g().adjacent(a, c)) {
            changed |= apply(c, b, Mark::Tail, "R1");
            changed |= apply(b, c, Mark::Arrow, "R1");
            break;
          }
      }
    return changed;
  }

  // R2: a -> b *-> c or a *-> b -> c, and a *-o c => a *-> c.
  bool r2() {
    bool changed = false;
    for (auto a : order)
      for (auto c : order) {
        if (!circle_at(g(), a, c)) continue;
        for (auto b : order) {
          if (b == a || b == c || !g().adjacent(a, b) || !g().adjacent(b, c)) continue;
          bool first = g().directed(a, b) && arrow_at(g(), b, c);
          bool second = arrow_at(g(), a, b) && g().directed(b, c);
          if (first || second) {
            changed |= apply(a, c, Mark::Arrow, "R2");
            break;
          }
        }
      }
    return changed;
  }

  // R3: a *-> b <-* c, a *-o t o-* c, a and c nonadjacent, t *-o b => t *-> b.
  bool r3() {
    bool changed = false;
    for (auto b : order)
      for (auto t : order) {
        if (t == b || !circle_at(g(), t, b)) continue;
        bool done = false;
        for (auto a : order) {
          if (done) break;
          if (a == b || a == t || !arrow_at(g(), a, b) || !circle_at(g(), a, t)) continue;
          for (auto c : order) {
            if (c == a || c == b || c == t || g().adjacent(a, c)) continue;
            if (arrow_at(g(), c, b) && circle_at(g(), c, t)) {
              changed |= apply(t, b, Mark::Arrow, "R3");
              done = true;
              break;
            }
          }
        }
      }
    return changed;
  }

  // Shortest discriminating path <theta, ..., a, b, c> for b, or nullopt.
  std::optional<std::size_t> discriminating_start(std::size_t a, std::size_t b, std::size_t c) {
    struct State {
      std::size_t node;
      std::vector<std::size_t> path;
    };
    std::deque<State> queue;
    queue.push_back({a, {c, b, a}});
    std::set<std::size_t> visited{a};
    while (!queue.empty()) {
      State s = std::move(queue.front());
      queue.pop_front();
      for (auto w : order) {
        if (std::find(s.path.begin(), s.path.end(), w) != s.path.end()) continue;
        if (!arrow_at(g(), w, s.node)) continue;  // s.node must be a collider
        if (!g().adjacent(w, c)) return w;
        if (g().directed(w, c) && arrow_at(g(), s.node, w) && !visited.count(w)) {
          visited.insert(w);
          auto path = s.path;
          path.push_back(w);
          queue.push_back({w, std::move(path)});
        }
      }
    }
    return std::nullopt;
  }

  // R4 on discriminating paths.
  bool r4() {
    bool changed = false;
    for (auto b : order)
      for (auto c : order) {
        if (!circle_at(g(), c, b)) continue;
        for (auto a : order) {
          if (a == b || a == c || !arrow_at(g(), b, a) || !g().directed(a, c)) continue;
          auto theta = discriminating_start(a, b, c);
          if (!theta) continue;
          if (seps.contains(*theta, c, b)) {
            changed |= apply(c, b, Mark::Tail, "R4");
            changed |= apply(b, c, Mark::Arrow, "R4");
          } else {
            changed |= apply(a, b, Mark::Arrow, "R4");
            changed |= apply(c, b, Mark::Arrow, "R4");
            changed |= apply(b, c, Mark::Arrow, "R4");
          }
          break;
        }
      }
    return changed;
  }

  // R8: a -> b -> c or a -o b -> c, with a o-> c => a -> c.
  bool r8() {
    bool changed = false;
    for (auto a : order)
      for (auto c : order) {
        if (!circle_at(g(), c, a) || !arrow_at(g(), a, c)) continue;
        for (auto b : order) {
          if (b == a || b == c) continue;
          bool via = (g().directed(a, b) || (tail_at(g(), b, a) && circle_at(g(), a, b))) && g().directed(b, c);
          if (via) {
            changed |= apply(c, a, Mark::Tail, "R8");
            break;
          }
        }
      }
    return changed;
  }

  // R9: a o-> c and an uncovered p.d. path <a, b, ..., c> with b, c nonadjacent => a -> c.
  bool r9() {
    bool changed = false;
    for (auto a : order)
      for (auto c : order) {
        if (!circle_at(g(), c, a) || !arrow_at(g(), a, c)) continue;
        bool found = uncovered_pd_paths(g(), a, c, [&](const std::vector<std::size_t>& p) {
          return p.size() >= 4 && !g().adjacent(p[1], c);
        });
        if (found) changed |= apply(c, a, Mark::Tail, "R9");
      }
    return changed;
  }

  // R10: a o-> c, b -> c <- d, uncovered p.d. paths a..b and a..d whose
  // second nodes differ and are nonadjacent => a -> c.
  bool r10() {
    bool changed = false;
    for (auto a : order)
      for (auto c : order) {
        if (!circle_at(g(), c, a) || !arrow_at(g(), a, c)) continue;
        std::vector<std::size_t> parents;
        for (auto v : order)
          if (v != a && g().directed(v, c)) parents.push_back(v);
        bool fire = false;
        for (std::size_t i = 0; i < parents.size() && !fire; ++i)
          for (std::size_t j = i + 1; j < parents.size() && !fire; ++j) {
            std::set<std::size_t> firsts_b, firsts_d;
            auto collect = [&](std::size_t target, std::set<std::size_t>& out) {
              uncovered_pd_paths(g(), a, target, [&](const std::vector<std::size_t>& p) {
                if (std::find(p.begin(), p.end(), c) == p.end()) out.insert(p[1]);
                return false;
              });
            };
            collect(parents[i], firsts_b);
            collect(parents[j], firsts_d);
            for (auto mu : firsts_b) {
              for (auto omega : firsts_d)
                if (mu != omega && !g().adjacent(mu, omega)) {
                  fire = true;
                  break;
                }
              if (fire) break;
            }
          }
        if (fire) changed |= apply(c, a, Mark::Tail, "R10");
      }
    return changed;
  }

  void run() {
    while (true) {
      if (r1() | r2() | r3() | r4()) continue;
      if (r8() | r9() | r10()) continue;
      break;
    }
  }
};

}  // namespace discovery_detail

// Final FCI orientation: R1-R4 and R8-R10 to a fixpoint.
inline MixedGraph fci_orientation_rules(MixedGraph g, const SepsetStore& seps,
                                        DiscoveryReport* report = nullptr) {
  discovery_detail::Orienter o(g, report);
  discovery_detail::FciRules rules{o, seps, discovery_detail::name_order(g.names())};
  rules.run();
  return g;
}

// ---------------------------------------------------------------------------
// Algorithms

template <IndependenceSource Indep>
MixedGraph pc(const std::vector<std::string>& names, Indep& indep, const DiscoveryConfig& config,
              const BackgroundKnowledge& bk = {}, DiscoveryReport* report = nullptr) {
  auto [g, seps] = skeleton(names, indep, config, report);
  g.set_all_marks(Mark::Tail);
  discovery_detail::Orienter o(g, report);
  o.force(forced_marks(g, bk));
  discovery_detail::orient_colliders(o, seps, true);
  if (report) report->stage("v-structures", g);
  while (discovery_detail::meek_pass(o)) {
  }
  g = apply_background_knowledge(std::move(g), bk);
  if (report) {
    report->stage("final", g);
    report->sepsets = seps;
  }
  return g;
}

template <IndependenceSource Indep>
MixedGraph fci(const std::vector<std::string>& names, Indep& indep, const DiscoveryConfig& config,
               const BackgroundKnowledge& bk = {}, DiscoveryReport* report = nullptr) {
  auto [g, seps] = skeleton(names, indep, config, report);

  // Provisional colliders only shape Possible-D-SEP.
  MixedGraph provisional = orient_v_structures(g, seps);
  const auto order = discovery_detail::name_order(names);
  std::vector<std::vector<std::size_t>> pds(names.size());
  for (std::size_t v = 0; v < names.size(); ++v) {
    for (auto w : order)
      for (auto p : discovery_detail::possible_dsep(provisional, v))
        if (p == w) pds[v].push_back(w);
  }

  std::vector<std::pair<std::size_t, std::size_t>> removals;
  for (const auto& e : g.edges()) {
    std::set<std::vector<std::size_t>> tried;
    bool removed = false;
    for (auto [a, b] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
      std::vector<std::size_t> cand;
      for (auto w : pds[a])
        if (w != b) cand.push_back(w);
      const std::size_t max_k = std::min(cand.size(), config.possible_dsep_max_size);
      for (std::size_t k = 0; k <= max_k && !removed; ++k) {
        removed = discovery_detail::for_each_subset(cand, k, [&](std::span<const std::size_t> z) {
          std::vector<std::size_t> key(z.begin(), z.end());
          std::sort(key.begin(), key.end());
          if (!tried.insert(key).second) return false;
          if (report) ++report->tests;
          if (!indep(e.a, e.b, z)) return false;
          seps.set(e.a, e.b, {z.begin(), z.end()});
          return true;
        });
      }
      if (removed) break;
    }
    if (removed) removals.emplace_back(e.a, e.b);
  }
  for (auto [a, b] : removals) g.remove_edge(a, b);
  if (report) report->stage("possible-dsep", g);

  g.set_all_marks(Mark::Circle);
  discovery_detail::Orienter o(g, report);
  o.force(forced_marks(g, bk));
  discovery_detail::orient_colliders(o, seps, false);
  if (report) report->stage("v-structures", g);
  discovery_detail::FciRules rules{o, seps, order};
  rules.run();
  g = apply_background_knowledge(std::move(g), bk);
  if (report) {
    report->stage("final", g);
    report->sepsets = seps;
  }
  return g;
}

template <IndependenceSource Indep>
MixedGraph discover(const std::vector<std::string>& names, Indep& indep, const DiscoveryConfig& config,
                    const BackgroundKnowledge& bk = {}, DiscoveryReport* report = nullptr) {
  return config.algorithm == Algorithm::PC ? pc(names, indep, config, bk, report)
                                           : fci(names, indep, config, bk, report);
}

struct DiscoveryResult {
  MixedGraph graph;
  DiscoveryReport report;
  std::vector<TraceEntry> trace;
};

// Discovery over a dataset with the configured CI test as the independence source.
inline DiscoveryResult run(const BinaryDataset& data, const DiscoveryConfig& config,
                           const BackgroundKnowledge& bk = {}) {
  config.validate();
  bk.validate();
  for (const auto& n : bk.roots) data.require(n);
  for (const auto& n : bk.leaf) data.require(n);
  auto start = std::chrono::steady_clock::now();
  DataIndependenceTest test(data, config.alpha, config.statistic);
  DiscoveryResult out;
  out.graph = discover(data.names(), test, config, bk, &out.report);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.trace = test.trace();
  return out;
}

// Wall time is included only on request so reports stay reproducible.
inline nlohmann::json report_json(const DiscoveryReport& r, const DiscoveryConfig& config,
                                  const BackgroundKnowledge& bk, const std::vector<std::string>& names,
                                  bool include_wall_time = false) {
  nlohmann::json j;
  j["config"] = {{"alpha", config.alpha},
                 {"algorithm", algorithm_name(config.algorithm)},
                 {"statistic", config.statistic == CIStatistic::GSquared ? "g2" : "chi2"},
                 {"possible_dsep_max_size", config.possible_dsep_max_size}};
  if (config.max_conditioning_size) j["config"]["max_conditioning_size"] = *config.max_conditioning_size;
  else j["config"]["max_conditioning_size"] = nullptr;
  j["background_knowledge"] = {{"roots", bk.roots}, {"leaf", bk.leaf}};
  j["stages"] = nlohmann::json::array();
  for (const auto& [stage, edges] : r.stage_edges) j["stages"].push_back({{"stage", stage}, {"edges", edges}});
  j["sepsets"] = nlohmann::json::array();
  for (const auto& [pair, z] : r.sepsets.all()) {
    std::vector<std::string> zn;
    for (auto v : z) zn.push_back(names[v]);
    std::string a = names[pair.first], b = names[pair.second];
    if (b < a) std::swap(a, b);
    j["sepsets"].push_back({{"x", a}, {"y", b}, {"z", zn}});
  }
  std::sort(j["sepsets"].begin(), j["sepsets"].end(), [](const auto& l, const auto& r) {
    return std::tie(l["x"].template get_ref<const std::string&>(), l["y"].template get_ref<const std::string&>()) <
           std::tie(r["x"].template get_ref<const std::string&>(), r["y"].template get_ref<const std::string&>());
  });
  j["rule_firings"] = r.rule_firings;
  j["conflicts"] = r.conflicts;
  j["tests"] = r.tests;
  if (include_wall_time) j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace testinj
