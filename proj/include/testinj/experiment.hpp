#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "testinj/dataset.hpp"
#include "testinj/discovery.hpp"
#include "testinj/graph.hpp"
#include "testinj/labeling.hpp"

namespace testinj {

// xoshiro256** 1.0 seeded through splitmix64. Doubles take the top 53 bits.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix64(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4];
};

// A DAG over binary nodes with P(node = 1 | parents). Row k of a node's
// table is the parent assignment whose bit i is the value of parents[i].
struct SyntheticScm {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> parents;
  std::vector<std::vector<double>> cpt;
  std::uint64_t seed = 0;

  std::size_t add_node(std::string name, std::vector<std::size_t> node_parents, std::vector<double> table) {
    names.push_back(std::move(name));
    parents.push_back(std::move(node_parents));
    cpt.push_back(std::move(table));
    return names.size() - 1;
  }

  std::size_t index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ValidationError("unknown SCM node '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }

  Dag dag() const {
    Dag d(names);
    for (std::size_t v = 0; v < names.size(); ++v)
      for (auto p : parents[v]) d.add_edge(p, v);
    return d;
  }

  void validate() const {
    if (parents.size() != names.size() || cpt.size() != names.size())
      throw ValidationError("SCM tables do not match node count");
    for (std::size_t v = 0; v < names.size(); ++v) {
      for (auto p : parents[v])
        if (p >= names.size() || p == v) throw ValidationError("SCM node '" + names[v] + "' has a bad parent");
      if (parents[v].size() > 20) throw ValidationError("SCM node '" + names[v] + "' has too many parents");
      if (cpt[v].size() != (std::size_t{1} << parents[v].size()))
        throw ValidationError("CPT of '" + names[v] + "' does not cover every parent assignment");
      for (double p : cpt[v])
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("CPT of '" + names[v] + "' has a value outside [0, 1]");
    }
    if (!dag().acyclic()) throw ValidationError("SCM graph has a directed cycle");
  }
};

// Ancestral sampling, row by row, nodes in topological order; one uniform
// draw per cell.
inline BinaryDataset sample(const SyntheticScm& scm, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample size must be at least 1");
  scm.validate();
  const auto order = *scm.dag().topological_order();
  const std::size_t k = scm.names.size();
  std::vector<BinaryDataset::Column> cols(k, BinaryDataset::Column(n));
  Xoshiro256 rng(seed);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto v : order) {
      std::size_t row = 0;
      for (std::size_t i = 0; i < scm.parents[v].size(); ++i) row |= std::size_t{cols[scm.parents[v][i]][r]} << i;
      cols[v][r] = rng.bernoulli(scm.cpt[v][row]);
    }
  }
  BinaryDataset d;
  for (std::size_t v = 0; v < k; ++v) d.add_column(scm.names[v], std::move(cols[v]));
  return d;
}

inline constexpr std::array<const char*, 3> kScenarioDemographics = {"race", "gender", "age"};

// Eight-node ground truth:
//   race -> evidentials, race -> stigmatizing, gender -> judgementals,
//   age -> judgementals (weak), evidentials -> negatives -> stigmatizing,
//   {judgementals, stigmatizing, evidentials} -> is_testinj (noisy OR).
// Effect sizes are ordered race > gender > age.
inline SyntheticScm scenario_generator(std::uint64_t seed) {
  SyntheticScm scm;
  scm.seed = seed;
  const auto race = scm.add_node("race", {}, {0.30});
  const auto gender = scm.add_node("gender", {}, {0.50});
  const auto age = scm.add_node("age", {}, {0.40});
  const auto ev = scm.add_node("evidentials", {race}, {0.30, 0.55});
  // parents (gender, age): rows 00, 10, 01, 11
  const auto judg = scm.add_node("judgementals", {gender, age}, {0.20, 0.26, 0.215, 0.275});
  const auto neg = scm.add_node("negatives", {ev}, {0.15, 0.45});
  // parents (race, negatives)
  const auto stig = scm.add_node("stigmatizing", {race, neg}, {0.10, 0.30, 0.25, 0.50});
  // parents (judgementals, stigmatizing, evidentials): 1 - 0.95 * prod(1 - w_i x_i)
  std::vector<double> outcome(8);
  const double w[3] = {0.40, 0.40, 0.30};
  for (std::size_t row = 0; row < 8; ++row) {
    double q = 0.95;
    for (int i = 0; i < 3; ++i)
      if (row >> i & 1u) q *= 1.0 - w[i];
    outcome[row] = 1.0 - q;
  }
  scm.add_node(kOutcomeColumn, {judg, stig, ev}, outcome);
  return scm;
}

// Replaces the named flag columns by their OR, placed first.
inline BinaryDataset coarsen(const BinaryDataset& d, const std::vector<std::string>& flags,
                             const std::string& merged_name = kCoarseColumn) {
  BinaryDataset::Column merged(d.rows(), 0);
  for (const auto& f : flags) {
    const auto& col = d.column(f);
    for (std::size_t r = 0; r < d.rows(); ++r) merged[r] |= col[r];
  }
  BinaryDataset out;
  out.add_column(merged_name, std::move(merged));
  for (std::size_t c = 0; c < d.cols(); ++c)
    if (std::find(flags.begin(), flags.end(), d.name(c)) == flags.end()) out.add_column(d.name(c), d.column(c));
  return out;
}

// Original rows followed by an identical copy.
inline BinaryDataset double_data(const BinaryDataset& d) {
  BinaryDataset out;
  for (std::size_t c = 0; c < d.cols(); ++c) {
    auto col = d.column(c);
    col.insert(col.end(), d.column(c).begin(), d.column(c).end());
    out.add_column(d.name(c), std::move(col));
  }
  return out;
}

inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid = {0.001, 0.005, 0.01, 0.02, 0.05, 0.08, 0.12,
                                           0.2,   0.23,  0.3,  0.4,  0.5,  0.57, 0.6};
  return grid;
}

struct SweepPoint {
  double alpha = 0;
  MixedGraph graph;
  std::vector<std::string> connected;        // non-isolated features
  std::vector<std::string> reaches_outcome;  // features with any path to the outcome
};

struct AlphaSweepResult {
  std::vector<double> grid;
  std::vector<std::string> features;
  std::string outcome;
  std::vector<SweepPoint> points;
  std::map<std::string, std::optional<double>> minimal_alpha;

  // Missing minimal alpha sorts after every grid value.
  double minimal_or_inf(const std::string& f) const {
    auto it = minimal_alpha.find(f);
    return it != minimal_alpha.end() && it->second ? *it->second : std::numeric_limits<double>::infinity();
  }
};

struct SweepOptions {
  std::vector<std::string> features;
  std::string outcome = kOutcomeColumn;
  unsigned jobs = 1;
};

inline AlphaSweepResult alpha_sweep(const BinaryDataset& data, const std::vector<double>& grid,
                                    DiscoveryConfig config, const BackgroundKnowledge& bk,
                                    const SweepOptions& opt) {
  if (grid.empty()) throw ValidationError("alpha grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    validate_alpha(grid[i]);
    if (i && !(grid[i] > grid[i - 1])) throw ValidationError("alpha grid must be strictly ascending");
  }
  if (opt.features.empty()) throw ValidationError("alpha sweep needs at least one feature column");
  for (const auto& f : opt.features) data.require(f);
  const bool has_outcome = data.index_of(opt.outcome).has_value();

  auto one = [&](double alpha) {
    DiscoveryConfig c = config;
    c.alpha = alpha;
    SweepPoint p;
    p.alpha = alpha;
    p.graph = run(data, c, bk).graph;
    for (const auto& f : opt.features) {
      const auto fi = p.graph.require(f);
      if (connected_nonisolated(p.graph, fi)) p.connected.push_back(f);
      if (has_outcome && linked(p.graph, fi, p.graph.require(opt.outcome))) p.reaches_outcome.push_back(f);
    }
    return p;
  };

  AlphaSweepResult out;
  out.grid = grid;
  out.features = opt.features;
  out.outcome = opt.outcome;
  const unsigned jobs = std::max(1u, opt.jobs);
  for (std::size_t start = 0; start < grid.size(); start += jobs) {
    std::vector<std::future<SweepPoint>> batch;
    for (std::size_t i = start; i < std::min(grid.size(), start + jobs); ++i)
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, one, grid[i]));
    for (auto& f : batch) out.points.push_back(f.get());
  }
  for (const auto& f : opt.features) {
    out.minimal_alpha[f] = std::nullopt;
    for (const auto& p : out.points)
      if (std::find(p.connected.begin(), p.connected.end(), f) != p.connected.end()) {
        out.minimal_alpha[f] = p.alpha;
        break;
      }
  }
  return out;
}

inline nlohmann::json sweep_json(const AlphaSweepResult& r) {
  nlohmann::json j;
  j["grid"] = r.grid;
  j["features"] = r.features;
  j["outcome"] = r.outcome;
  j["minimal_alpha"] = nlohmann::json::object();
  for (const auto& [f, a] : r.minimal_alpha) j["minimal_alpha"][f] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
  j["points"] = nlohmann::json::array();
  for (const auto& p : r.points)
    j["points"].push_back({{"alpha", p.alpha},
                           {"graph", to_json(p.graph)},
                           {"connected", p.connected},
                           {"reaches_outcome", p.reaches_outcome}});
  return j;
}

// One row per alpha, one column per feature: C connected, P also linked to the outcome.
inline void print_sweep_table(std::ostream& out, const AlphaSweepResult& r) {
  out << std::left << std::setw(8) << "alpha";
  for (const auto& f : r.features) out << ' ' << std::setw(std::max<std::size_t>(f.size(), 4)) << f;
  out << " edges\n";
  for (const auto& p : r.points) {
    std::ostringstream a;
    a << p.alpha;
    out << std::setw(8) << a.str();
    for (const auto& f : r.features) {
      bool c = std::find(p.connected.begin(), p.connected.end(), f) != p.connected.end();
      bool l = std::find(p.reaches_outcome.begin(), p.reaches_outcome.end(), f) != p.reaches_outcome.end();
      std::string cell = c ? (l ? "C+P" : "C") : "-";
      out << ' ' << std::setw(std::max<std::size_t>(f.size(), 4)) << cell;
    }
    out << ' ' << p.graph.edge_count() << '\n';
  }
  out << "minimal alpha:";
  for (const auto& f : r.features) {
    auto it = r.minimal_alpha.find(f);
    out << ' ' << f << '=';
    if (it != r.minimal_alpha.end() && it->second) out << *it->second;
    else out << "none";
  }
  out << '\n';
}

}  // namespace testinj
