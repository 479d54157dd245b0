#pragma once

// Conditional independence testing for binary columns.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "testinj/dataset.hpp"
#include "testinj/error.hpp"

namespace testinj {

// ---------------------------------------------------------------------------
// Chi-square distribution

namespace gamma_detail {

inline constexpr double kEps = 1e-16;
inline constexpr int kMaxIter = 100000;

// P(a, x) by its power series; converges quickly for x < a + 1.
inline double lower_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz), for x >= a + 1.
inline double upper_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace gamma_detail

// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0) || x < 0) throw ValidationError("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0) return 0.0;
  if (x < a + 1.0) return gamma_detail::lower_series(a, x);
  return 1.0 - gamma_detail::upper_fraction(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
// directly in the tail so tiny p-values keep their precision.
inline double regularized_gamma_q(double a, double x) {
  if (!(a > 0) || x < 0) throw ValidationError("regularized_gamma_q: need a > 0 and x >= 0");
  if (x == 0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_detail::lower_series(a, x);
  return gamma_detail::upper_fraction(a, x);
}

inline double chi_square_cdf(double x, int dof) {
  if (dof < 1) throw ValidationError("chi_square_cdf: dof must be >= 1");
  if (x < 0) throw ValidationError("chi_square_cdf: statistic must be >= 0");
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

// Upper tail; by convention 1 when dof is 0.
inline double chi_square_sf(double x, int dof) {
  if (dof == 0) return 1.0;
  if (dof < 0) throw ValidationError("chi_square_sf: dof must be >= 0");
  if (x < 0) throw ValidationError("chi_square_sf: statistic must be >= 0");
  return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

// ---------------------------------------------------------------------------
// Contingency tables

using Table2x2 = std::array<std::array<std::uint64_t, 2>, 2>;

struct ContingencyStratum {
  std::vector<std::uint8_t> assignment;  // values of the conditioning columns, in Z order
  Table2x2 counts{};                     // counts[x][y]

  std::uint64_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
};

// Distinct rows of a dataset with multiplicities. Contingency tables are
// summed over distinct patterns, so their cost does not grow with n.
class CountIndex {
 public:
  explicit CountIndex(const BinaryDataset& d) : names_(d.names()), rows_(d.rows()) {
    if (d.cols() > 64) throw ValidationError("CI testing supports at most 64 columns");
    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      std::uint64_t code = 0;
      for (std::size_t c = 0; c < d.cols(); ++c)
        code |= static_cast<std::uint64_t>(d.at(r, c)) << c;
      ++counts[code];
    }
    patterns_.assign(counts.begin(), counts.end());
    std::sort(patterns_.begin(), patterns_.end());
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& patterns() const { return patterns_; }

 private:
  std::vector<std::string> names_;
  std::size_t rows_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> patterns_;
};

// One stratum per realised assignment of Z, ordered by assignment.
inline std::vector<ContingencyStratum> stratify(const CountIndex& idx, std::size_t x,
                                                std::size_t y, std::span<const std::size_t> z) {
  const std::size_t n = idx.cols();
  if (x >= n || y >= n) throw ValidationError("stratify: column index out of range");
  if (x == y) throw ValidationError("stratify: x and y must differ");
  for (auto c : z) {
    if (c >= n) throw ValidationError("stratify: column index out of range");
    if (c == x || c == y) throw ValidationError("stratify: conditioning set contains x or y");
  }
  if (z.size() > 30) throw ValidationError("stratify: conditioning set too large");
  std::map<std::uint64_t, Table2x2> strata;
  for (const auto& [code, count] : idx.patterns()) {
    std::uint64_t key = 0;
    for (std::size_t k = 0; k < z.size(); ++k) key |= ((code >> z[k]) & 1u) << k;
    strata[key][(code >> x) & 1u][(code >> y) & 1u] += count;
  }
  std::vector<ContingencyStratum> out;
  out.reserve(strata.size());
  for (const auto& [key, table] : strata) {
    ContingencyStratum s;
    s.assignment.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) s.assignment[k] = (key >> k) & 1u;
    s.counts = table;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<ContingencyStratum> stratify(const BinaryDataset& d, const std::string& x,
                                                const std::string& y,
                                                const std::vector<std::string>& z) {
  std::vector<std::size_t> zi;
  for (const auto& c : z) zi.push_back(d.require(c));
  return stratify(CountIndex(d), d.require(x), d.require(y), zi);
}

struct TestStatistic {
  double statistic = 0;
  int dof = 0;
  std::size_t valid_strata = 0;
};

namespace citest_detail {

inline bool all_margins_positive(const Table2x2& t) {
  return t[0][0] + t[0][1] > 0 && t[1][0] + t[1][1] > 0 && t[0][0] + t[1][0] > 0 &&
         t[0][1] + t[1][1] > 0;
}

template <class CellTerm>
TestStatistic accumulate(std::span<const ContingencyStratum> strata, CellTerm term) {
  if (strata.empty()) throw ValidationError("test statistic needs at least one stratum");
  TestStatistic out;
  for (const auto& s : strata) {
    const auto& t = s.counts;
    if (!all_margins_positive(t)) continue;
    const double n = static_cast<double>(s.total());
    const double row[2] = {static_cast<double>(t[0][0] + t[0][1]), static_cast<double>(t[1][0] + t[1][1])};
    const double col[2] = {static_cast<double>(t[0][0] + t[1][0]), static_cast<double>(t[0][1] + t[1][1])};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        out.statistic += term(static_cast<double>(t[i][j]), row[i] * col[j] / n);
    out.dof += 1;
    out.valid_strata += 1;
  }
  out.statistic = std::max(0.0, out.statistic);
  return out;
}

}  // namespace citest_detail

// G^2 = 2 sum O ln(O/E); strata with a zero margin add nothing to the
// statistic or the degrees of freedom.
inline TestStatistic g_squared(std::span<const ContingencyStratum> strata) {
  auto r = citest_detail::accumulate(strata, [](double o, double e) {
    return o > 0 ? o * std::log(o / e) : 0.0;
  });
  r.statistic *= 2.0;
  return r;
}

inline TestStatistic pearson_chi_square(std::span<const ContingencyStratum> strata) {
  return citest_detail::accumulate(strata, [](double o, double e) { return (o - e) * (o - e) / e; });
}

enum class CIStatistic { GSquared, PearsonChiSquare };

struct CITestResult {
  double statistic = 0;
  int dof = 0;
  double p_value = 1;
  bool independent = true;
  bool low_power = false;
};

inline void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must be in (0, 1), got " + std::to_string(alpha));
}

inline CITestResult evaluate(std::span<const ContingencyStratum> strata, std::uint64_t n,
                             double alpha, CIStatistic kind) {
  TestStatistic s = kind == CIStatistic::GSquared ? g_squared(strata) : pearson_chi_square(strata);
  CITestResult r;
  r.statistic = s.statistic;
  r.dof = s.dof;
  r.p_value = chi_square_sf(s.statistic, s.dof);
  r.independent = r.p_value > alpha;
  r.low_power = n < 10 * std::max<std::uint64_t>(1, s.valid_strata);
  return r;
}

inline CITestResult ci_test(const BinaryDataset& d, const std::string& x, const std::string& y,
                            const std::vector<std::string>& z, double alpha,
                            CIStatistic kind = CIStatistic::GSquared) {
  validate_alpha(alpha);
  auto strata = stratify(d, x, y, z);
  return evaluate(strata, d.rows(), alpha, kind);
}

// ---------------------------------------------------------------------------
// Independence source for discovery over a dataset

struct TraceEntry {
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<std::size_t> z;
  CITestResult result;
};

// Caches results per (x, y, Z) and records every query in order.
class DataIndependenceTest {
 public:
  DataIndependenceTest(const BinaryDataset& d, double alpha, CIStatistic kind = CIStatistic::GSquared)
      : index_(d), alpha_(alpha), kind_(kind) {
    validate_alpha(alpha);
  }

  bool operator()(std::size_t x, std::size_t y, std::span<const std::size_t> z) {
    return query(x, y, z).independent;
  }

  const CITestResult& query(std::size_t x, std::size_t y, std::span<const std::size_t> z) {
    Key key{std::min(x, y), std::max(x, y), {z.begin(), z.end()}};
    std::sort(key.z.begin(), key.z.end());
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      auto strata = stratify(index_, x, y, z);
      it = cache_.emplace(std::move(key), evaluate(strata, index_.rows(), alpha_, kind_)).first;
    }
    trace_.push_back({x, y, {z.begin(), z.end()}, it->second});
    return it->second;
  }

  std::size_t variables() const { return index_.cols(); }
  const std::vector<std::string>& names() const { return index_.names(); }
  double alpha() const { return alpha_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  std::size_t distinct_tests() const { return cache_.size(); }

 private:
  struct Key {
    std::size_t x, y;
    std::vector<std::size_t> z;
    auto operator<=>(const Key&) const = default;
  };

  CountIndex index_;
  double alpha_;
  CIStatistic kind_;
  std::map<Key, CITestResult> cache_;
  std::vector<TraceEntry> trace_;
};

// `x,y,Z,statistic,dof,p,independent`; Z is ';'-separated.
inline void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace,
                            const std::vector<std::string>& names) {
  out << "x,y,Z,statistic,dof,p,independent\n";
  char buf[64];
  for (const auto& t : trace) {
    out << names[t.x] << ',' << names[t.y] << ',';
    for (std::size_t k = 0; k < t.z.size(); ++k) out << (k ? ";" : "") << names[t.z[k]];
    std::snprintf(buf, sizeof buf, ",%.10g,%d,%.10g,", t.result.statistic, t.result.dof, t.result.p_value);
    out << buf << (t.result.independent ? 1 : 0) << '\n';
  }
}

}  // namespace testinj
