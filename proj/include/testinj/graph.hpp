#pragma once

// Mixed graphs with tail/arrow/circle endpoint marks. The same type holds
// DAGs, CPDAGs (tail/arrow marks) and PAGs (all three marks).

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "testinj/error.hpp"

namespace testinj {

enum class Mark : std::int8_t { Tail = 0, Arrow = 1, Circle = 2 };

inline std::string_view mark_name(Mark m) {
  switch (m) {
    case Mark::Tail: return "tail";
    case Mark::Arrow: return "arrow";
    case Mark::Circle: return "circle";
  }
  return "?";
}

class MixedGraph {
 public:
  MixedGraph() = default;

  explicit MixedGraph(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_)
      if (!seen.insert(n).second) throw ValidationError("duplicate node name '" + n + "'");
    marks_.assign(names_.size() * names_.size(), kNone);
  }

  static MixedGraph complete(std::vector<std::string> names, Mark m) {
    MixedGraph g(std::move(names));
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) g.add_edge(i, j, m, m);
    return g;
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::size_t require(const std::string& name) const {
    auto i = find(name);
    if (!i) throw ValidationError("unknown node '" + name + "'");
    return *i;
  }

  bool adjacent(std::size_t a, std::size_t b) const { return raw(a, b) != kNone; }

  // Mark at `to` on the edge between `from` and `to`.
  Mark mark_at(std::size_t from, std::size_t to) const {
    auto m = raw(from, to);
    if (m == kNone) throw ValidationError("no edge between " + name(from) + " and " + name(to));
    return static_cast<Mark>(m);
  }

  // Mark at `a` and at `b` on edge a-b.
  void add_edge(std::size_t a, std::size_t b, Mark at_a, Mark at_b) {
    if (a == b) throw ValidationError("self-loop on " + name(a));
    if (adjacent(a, b)) throw ValidationError("duplicate edge " + name(a) + " - " + name(b));
    raw(b, a) = static_cast<std::int8_t>(at_a);
    raw(a, b) = static_cast<std::int8_t>(at_b);
  }

  void add_edge(const std::string& a, const std::string& b, Mark at_a, Mark at_b) {
    add_edge(require(a), require(b), at_a, at_b);
  }

  void set_mark(std::size_t from, std::size_t to, Mark m) {
    if (!adjacent(from, to)) throw ValidationError("no edge between " + name(from) + " and " + name(to));
    raw(from, to) = static_cast<std::int8_t>(m);
  }

  void remove_edge(std::size_t a, std::size_t b) {
    raw(a, b) = kNone;
    raw(b, a) = kNone;
  }

  std::vector<std::size_t> neighbors(std::size_t a) const {
    std::vector<std::size_t> out;
    for (std::size_t b = 0; b < size(); ++b)
      if (adjacent(a, b)) out.push_back(b);
    return out;
  }

  std::size_t degree(std::size_t a) const {
    std::size_t d = 0;
    for (std::size_t b = 0; b < size(); ++b) d += adjacent(a, b);
    return d;
  }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (std::size_t a = 0; a < size(); ++a)
      for (std::size_t b = a + 1; b < size(); ++b) e += adjacent(a, b);
    return e;
  }

  // a -> b: tail at a, arrow at b.
  bool directed(std::size_t a, std::size_t b) const {
    return adjacent(a, b) && raw(b, a) == static_cast<std::int8_t>(Mark::Tail) &&
           raw(a, b) == static_cast<std::int8_t>(Mark::Arrow);
  }

  bool has_marks(std::size_t a, std::size_t b, Mark at_a, Mark at_b) const {
    return adjacent(a, b) && mark_at(b, a) == at_a && mark_at(a, b) == at_b;
  }

  void set_all_marks(Mark m) {
    for (auto& v : marks_)
      if (v != kNone) v = static_cast<std::int8_t>(m);
  }

  struct Edge {
    std::size_t a, b;
    Mark at_a, at_b;
  };

  // Each edge once, with the lexicographically smaller name first, sorted by names.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j) {
        if (!adjacent(i, j)) continue;
        std::size_t a = i, b = j;
        if (names_[b] < names_[a]) std::swap(a, b);
        out.push_back({a, b, mark_at(b, a), mark_at(a, b)});
      }
    std::sort(out.begin(), out.end(), [&](const Edge& l, const Edge& r) {
      return std::tie(names_[l.a], names_[l.b]) < std::tie(names_[r.a], names_[r.b]);
    });
    return out;
  }

  bool operator==(const MixedGraph&) const = default;

 private:
  static constexpr std::int8_t kNone = -1;

  std::int8_t raw(std::size_t from, std::size_t to) const { return marks_[from * size() + to]; }
  std::int8_t& raw(std::size_t from, std::size_t to) { return marks_[from * size() + to]; }

  std::vector<std::string> names_;
  std::vector<std::int8_t> marks_;  // marks_[from * n + to] = mark at `to`
};

// ---------------------------------------------------------------------------
// DAGs and d-separation

class Dag {
 public:
  explicit Dag(std::vector<std::string> names) : names_(std::move(names)), parents_(names_.size()) {}

  static Dag from_graph(const MixedGraph& g) {
    Dag d(g.names());
    for (const auto& e : g.edges()) {
      if (e.at_a == Mark::Tail && e.at_b == Mark::Arrow) d.add_edge(e.a, e.b);
      else if (e.at_a == Mark::Arrow && e.at_b == Mark::Tail) d.add_edge(e.b, e.a);
      else throw ValidationError("graph is not a DAG: edge " + g.name(e.a) + " - " + g.name(e.b) + " is not directed");
    }
    if (!d.acyclic()) throw ValidationError("graph is not a DAG: directed cycle");
    return d;
  }

  void add_edge(std::size_t from, std::size_t to) {
    if (from == to) throw ValidationError("self-loop in DAG");
    if (std::find(parents_[to].begin(), parents_[to].end(), from) != parents_[to].end()) return;
    parents_[to].push_back(from);
    std::sort(parents_[to].begin(), parents_[to].end());
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }

  std::vector<std::size_t> children(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < size(); ++c)
      if (std::binary_search(parents_[c].begin(), parents_[c].end(), v)) out.push_back(c);
    return out;
  }

  bool has_edge(std::size_t from, std::size_t to) const {
    return std::binary_search(parents_[to].begin(), parents_[to].end(), from);
  }

  std::optional<std::vector<std::size_t>> topological_order() const {
    std::vector<std::size_t> indeg(size());
    for (std::size_t v = 0; v < size(); ++v) indeg[v] = parents_[v].size();
    std::vector<std::size_t> order;
    std::vector<bool> done(size());
    while (order.size() < size()) {
      bool progressed = false;
      for (std::size_t v = 0; v < size(); ++v) {
        if (done[v] || indeg[v] != 0) continue;
        done[v] = true;
        order.push_back(v);
        for (auto c : children(v)) --indeg[c];
        progressed = true;
        break;
      }
      if (!progressed) return std::nullopt;
    }
    return order;
  }

  bool acyclic() const { return topological_order().has_value(); }

  MixedGraph to_graph() const {
    MixedGraph g(names_);
    for (std::size_t v = 0; v < size(); ++v)
      for (auto p : parents_[v]) g.add_edge(p, v, Mark::Tail, Mark::Arrow);
    return g;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> parents_;
};

// Reachability over (node, direction) states: a trail may pass a
// non-collider not in Z, and a collider that is in Z or has a descendant in Z.
inline bool d_separated(const Dag& dag, std::size_t x, std::size_t y, std::span<const std::size_t> z) {
  const std::size_t n = dag.size();
  if (x >= n || y >= n) throw ValidationError("d_separated: unknown node");
  if (x == y) throw ValidationError("d_separated: x and y must differ");
  std::vector<bool> in_z(n);
  for (auto v : z) {
    if (v >= n) throw ValidationError("d_separated: unknown node");
    if (v == x || v == y) throw ValidationError("d_separated: x or y in conditioning set");
    in_z[v] = true;
  }
  // Ancestors of Z (including Z): colliders there are open.
  std::vector<bool> anc(n);
  std::vector<std::size_t> stack(z.begin(), z.end());
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    if (anc[v]) continue;
    anc[v] = true;
    for (auto p : dag.parents(v)) stack.push_back(p);
  }
  std::vector<std::vector<std::size_t>> kids(n);
  for (std::size_t v = 0; v < n; ++v) kids[v] = dag.children(v);

  // up = arrived from a child (moving against edge direction), down = from a parent.
  enum Dir { kUp = 0, kDown = 1 };
  std::vector<std::array<bool, 2>> seen(n, {false, false});
  std::vector<std::pair<std::size_t, Dir>> frontier{{x, kUp}};
  while (!frontier.empty()) {
    auto [v, dir] = frontier.back();
    frontier.pop_back();
    if (seen[v][dir]) continue;
    seen[v][dir] = true;
    if (v == y) return false;
    if (dir == kUp && !in_z[v]) {
      for (auto p : dag.parents(v)) frontier.push_back({p, kUp});
      for (auto c : kids[v]) frontier.push_back({c, kDown});
    } else if (dir == kDown) {
      if (!in_z[v])
        for (auto c : kids[v]) frontier.push_back({c, kDown});
      if (anc[v])
        for (auto p : dag.parents(v)) frontier.push_back({p, kUp});
    }
  }
  return true;
}

inline bool d_separated(const Dag& dag, const std::string& x, const std::string& y,
                        const std::vector<std::string>& z) {
  auto idx = [&](const std::string& s) {
    auto it = std::find(dag.names().begin(), dag.names().end(), s);
    if (it == dag.names().end()) throw ValidationError("unknown node '" + s + "'");
    return static_cast<std::size_t>(it - dag.names().begin());
  };
  std::vector<std::size_t> zi;
  for (const auto& s : z) zi.push_back(idx(s));
  return d_separated(dag, idx(x), idx(y), zi);
}

// ---------------------------------------------------------------------------
// Background knowledge

struct BackgroundKnowledge {
  std::set<std::string> roots;  // nothing else causes these
  std::set<std::string> leaf;   // these cause nothing else

  bool empty() const { return roots.empty() && leaf.empty(); }

  void validate() const {
    for (const auto& r : roots)
      if (leaf.count(r)) throw ValidationError("node '" + r + "' is both a root and a leaf");
  }
};

// Marks fixed by background knowledge, as (from, to, mark at `to`).
struct ForcedMark {
  std::size_t from, to;
  Mark mark;
};

inline std::vector<ForcedMark> forced_marks(const MixedGraph& g, const BackgroundKnowledge& bk) {
  bk.validate();
  std::vector<bool> root(g.size()), leaf(g.size());
  for (const auto& r : bk.roots) root[g.require(r)] = true;
  for (const auto& l : bk.leaf) leaf[g.require(l)] = true;
  std::vector<ForcedMark> out;
  for (const auto& e : g.edges()) {
    auto orient = [&](std::size_t from, std::size_t to) {
      out.push_back({to, from, Mark::Tail});
      out.push_back({from, to, Mark::Arrow});
    };
    const std::size_t a = e.a, b = e.b;
    if (leaf[a] && leaf[b])
      throw ConstraintViolation("edge between leaf nodes " + g.name(a) + " and " + g.name(b));
    if (root[a] && root[b]) continue;
    if (root[a]) orient(a, b);
    else if (root[b]) orient(b, a);
    else if (leaf[b]) orient(a, b);
    else if (leaf[a]) orient(b, a);
  }
  return out;
}

// Orients root -> v and v -> leaf; root-root edges are left alone.
inline MixedGraph apply_background_knowledge(MixedGraph g, const BackgroundKnowledge& bk) {
  for (const auto& f : forced_marks(g, bk)) g.set_mark(f.from, f.to, f.mark);
  return g;
}

inline bool connected_nonisolated(const MixedGraph& g, std::size_t node) { return g.degree(node) > 0; }

inline bool connected_nonisolated(const MixedGraph& g, const std::string& node) {
  return connected_nonisolated(g, g.require(node));
}

// Path between a and b ignoring marks.
inline bool linked(const MixedGraph& g, std::size_t a, std::size_t b) {
  std::vector<bool> seen(g.size());
  std::vector<std::size_t> stack{a};
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    if (v == b) return true;
    if (seen[v]) continue;
    seen[v] = true;
    for (auto w : g.neighbors(v)) stack.push_back(w);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace dot_detail {

inline bool plain_id(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  static const std::set<std::string> kKeywords = {"node", "edge", "graph", "digraph", "subgraph", "strict"};
  std::string l = s;
  for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return !kKeywords.count(l);
}

inline std::string id(const std::string& s) {
  if (plain_id(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string_view arrow_style(Mark m) {
  switch (m) {
    case Mark::Arrow: return "normal";
    case Mark::Tail: return "none";
    case Mark::Circle: return "odot";
  }
  return "none";
}

inline std::optional<Mark> mark_from_style(std::string_view s) {
  if (s == "normal") return Mark::Arrow;
  if (s == "none") return Mark::Tail;
  if (s == "odot") return Mark::Circle;
  return std::nullopt;
}

}  // namespace dot_detail

// Nodes sorted by name, then edges sorted by (name a, name b) with a < b.
inline std::string emit_dot(const MixedGraph& g) {
  std::ostringstream out;
  out << "digraph scm {\n";
  std::vector<std::string> sorted = g.names();
  std::sort(sorted.begin(), sorted.end());
  for (const auto& n : sorted) out << "  " << dot_detail::id(n) << ";\n";
  for (const auto& e : g.edges())
    out << "  " << dot_detail::id(g.name(e.a)) << " -> " << dot_detail::id(g.name(e.b))
        << " [dir=both, arrowtail=" << dot_detail::arrow_style(e.at_a)
        << ", arrowhead=" << dot_detail::arrow_style(e.at_b) << "];\n";
  out << "}\n";
  return out.str();
}

// Reads the subset of DOT that emit_dot produces. Node order in the result
// is the order of node statements.
inline MixedGraph parse_dot(std::string_view text, const std::string& source = "<dot>") {
  std::size_t pos = 0, line = 1;
  auto error = [&](const std::string& what) { return ParseError(source, line, pos, what); };
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
      if (text[pos] == '\n') ++line;
      ++pos;
    }
  };
  auto read_id = [&]() -> std::string {
    skip_ws();
    if (pos >= text.size()) throw error("unexpected end of input");
    std::string out;
    if (text[pos] == '"') {
      ++pos;
      while (pos < text.size() && text[pos] != '"') {
        if (text[pos] == '\\' && pos + 1 < text.size()) ++pos;
        out.push_back(text[pos++]);
      }
      if (pos >= text.size()) throw error("unterminated quoted id");
      ++pos;
      return out;
    }
    while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      out.push_back(text[pos++]);
    if (out.empty()) throw error(std::string("expected identifier, got '") + text[pos] + "'");
    return out;
  };
  auto expect = [&](std::string_view tok) {
    skip_ws();
    if (text.substr(pos, tok.size()) != tok) throw error("expected '" + std::string(tok) + "'");
    pos += tok.size();
  };
  auto peek = [&](std::string_view tok) {
    skip_ws();
    return text.substr(pos, tok.size()) == tok;
  };

  if (read_id() != "digraph") throw error("expected 'digraph'");
  if (!peek("{")) read_id();
  expect("{");

  std::vector<std::string> names;
  struct PendingEdge {
    std::string a, b;
    Mark at_a, at_b;
  };
  std::vector<PendingEdge> edges;
  while (!peek("}")) {
    std::string first = read_id();
    if (peek("->")) {
      expect("->");
      std::string second = read_id();
      std::optional<Mark> tail, head;
      bool both = false;
      if (peek("[")) {
        expect("[");
        while (!peek("]")) {
          std::string key = read_id();
          expect("=");
          std::string value = read_id();
          if (key == "dir") both = value == "both";
          else if (key == "arrowtail") tail = dot_detail::mark_from_style(value);
          else if (key == "arrowhead") head = dot_detail::mark_from_style(value);
          if (peek(",")) expect(",");
        }
        expect("]");
      }
      if (!both || !tail || !head) throw error("edge needs dir=both with arrowtail and arrowhead");
      edges.push_back({first, second, *tail, *head});
    } else {
      names.push_back(first);
    }
    if (peek(";")) expect(";");
  }
  expect("}");
  MixedGraph g(names);
  for (const auto& e : edges) g.add_edge(e.a, e.b, e.at_a, e.at_b);
  return g;
}

// {"nodes": [...], "edges": [[a, b, mark_a, mark_b], ...]}
inline nlohmann::json to_json(const MixedGraph& g) {
  nlohmann::json j;
  j["nodes"] = g.names();
  j["edges"] = nlohmann::json::array();
  for (const auto& e : g.edges())
    j["edges"].push_back({g.name(e.a), g.name(e.b), mark_name(e.at_a), mark_name(e.at_b)});
  return j;
}

}  // namespace testinj
