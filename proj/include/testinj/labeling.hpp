#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "testinj/corpus.hpp"
#include "testinj/dataset.hpp"
#include "testinj/error.hpp"
#include "testinj/lexicon.hpp"

namespace testinj {

inline constexpr const char* kGenderColumn = "is_marginalized_gender";
inline constexpr const char* kRaceColumn = "is_marginalized_race";
inline constexpr const char* kAgeColumn = "is_marginalized_age";
inline constexpr const char* kCoarseColumn = "is_marginalized";
inline constexpr const char* kOutcomeColumn = "is_testinj";

// Average matched terms per record, per category.
struct PatientRates {
  PatientKey key;
  PerCategory<double> rate;
};

enum class ThresholdMode { Percentile90, Maximum };

struct ThresholdPolicy {
  ThresholdMode mode = ThresholdMode::Percentile90;
  double fraction = 0.10;

  void validate() const {
    if (!(fraction > 0.0 && fraction <= 1.0))
      throw ValidationError("threshold fraction must be in (0, 1], got " + std::to_string(fraction));
  }
};

enum class Granularity { Fine, Coarse };

// How the four category indicators combine into is_testinj.
enum class OutcomeRule { Any, All };

struct DemographicFlags {
  std::uint8_t gender = 0;
  std::uint8_t race = 0;
  std::uint8_t age = 0;

  bool operator==(const DemographicFlags&) const = default;
};

inline PatientRates compute_rates(const Patient& patient, const LexiconMatcher& matcher) {
  if (patient.record_count == 0) throw ValidationError("patient has no records");
  PatientRates out{patient.key, {}};
  CategoryCounts total;
  for (const auto& note : patient.notes) {
    auto c = matcher.count(note);
    for (auto cat : kAllCategories) total[cat] += c[cat];
  }
  for (auto cat : kAllCategories)
    out.rate[cat] = static_cast<double>(total[cat]) / static_cast<double>(patient.record_count);
  return out;
}

inline PatientRates compute_rates(const Patient& patient, const Lexicon& lex) {
  return compute_rates(patient, LexiconMatcher(lex));
}

// 1-based nearest rank of the 90th percentile: ceil(0.9 n).
inline std::size_t percentile90_rank(std::size_t n) { return (9 * n + 9) / 10; }

inline double category_threshold(std::span<const double> rates, const ThresholdPolicy& policy) {
  policy.validate();
  if (rates.empty()) throw ValidationError("cannot compute a threshold over an empty population");
  if (policy.mode == ThresholdMode::Maximum)
    return policy.fraction * *std::max_element(rates.begin(), rates.end());
  std::vector<double> sorted(rates.begin(), rates.end());
  const std::size_t rank = percentile90_rank(sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  return policy.fraction * sorted[rank - 1];
}

inline PerCategory<double> category_thresholds(const std::vector<PatientRates>& rates,
                                               const ThresholdPolicy& policy) {
  PerCategory<double> out;
  std::vector<double> column(rates.size());
  for (auto c : kAllCategories) {
    for (std::size_t i = 0; i < rates.size(); ++i) column[i] = rates[i].rate[c];
    out[c] = category_threshold(column, policy);
  }
  return out;
}

inline DemographicFlags binarize_demographics(const Patient& p) {
  DemographicFlags f;
  f.gender = p.key.gender == Gender::Female;
  f.race = p.key.race == Race::Black || p.key.race == Race::Latino;
  f.age = p.age_group == AgeGroup::Child || p.age_group == AgeGroup::Senior;
  return f;
}

inline std::uint8_t coarse_marginalization(const DemographicFlags& f) {
  return f.gender || f.race || f.age;
}

struct LabelingOptions {
  ThresholdPolicy policy;
  Granularity granularity = Granularity::Fine;
  OutcomeRule outcome = OutcomeRule::Any;
};

struct LabeledData {
  BinaryDataset dataset;
  std::vector<PatientRates> rates;
  PerCategory<double> thresholds;
};

// Indicator for category c is rate > threshold (strict), so a category
// nobody uses never fires.
inline LabeledData build_dataset_from_rates(const std::vector<DemographicFlags>& flags,
                                            std::vector<PatientRates> rates,
                                            const LabelingOptions& opt) {
  if (rates.empty()) throw ValidationError("cannot build a dataset from zero patients");
  if (flags.size() != rates.size()) throw ValidationError("flags and rates differ in length");
  LabeledData out;
  out.thresholds = category_thresholds(rates, opt.policy);
  const std::size_t n = rates.size();

  if (opt.granularity == Granularity::Fine) {
    BinaryDataset::Column g(n), r(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = flags[i].gender;
      r[i] = flags[i].race;
      a[i] = flags[i].age;
    }
    out.dataset.add_column(kGenderColumn, std::move(g));
    out.dataset.add_column(kRaceColumn, std::move(r));
    out.dataset.add_column(kAgeColumn, std::move(a));
  } else {
    BinaryDataset::Column m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = coarse_marginalization(flags[i]);
    out.dataset.add_column(kCoarseColumn, std::move(m));
  }

  BinaryDataset::Column outcome(n, opt.outcome == OutcomeRule::All ? 1 : 0);
  for (auto c : kAllCategories) {
    BinaryDataset::Column ind(n);
    for (std::size_t i = 0; i < n; ++i) {
      ind[i] = rates[i].rate[c] > out.thresholds[c];
      if (opt.outcome == OutcomeRule::Any) outcome[i] |= ind[i];
      else outcome[i] &= ind[i];
    }
    out.dataset.add_column(std::string(category_column(c)), std::move(ind));
  }
  out.dataset.add_column(kOutcomeColumn, std::move(outcome));
  out.rates = std::move(rates);
  return out;
}

inline LabeledData build_dataset(const std::vector<Patient>& patients, const Lexicon& lex,
                                 const LabelingOptions& opt) {
  LexiconMatcher matcher(lex);
  std::vector<DemographicFlags> flags;
  std::vector<PatientRates> rates;
  flags.reserve(patients.size());
  rates.reserve(patients.size());
  for (const auto& p : patients) {
    flags.push_back(binarize_demographics(p));
    rates.push_back(compute_rates(p, matcher));
  }
  return build_dataset_from_rates(flags, std::move(rates), opt);
}

inline void write_rates_csv(std::ostream& out, const std::vector<PatientRates>& rates) {
  csv::Row header{"patient_id", "gender", "race", "diagnosis"};
  for (auto c : kAllCategories) header.emplace_back(category_column(c));
  csv::write_row(out, header);
  for (const auto& r : rates) {
    csv::Row row{r.key.patient_id, std::string(gender_name(r.key.gender)),
                 std::string(race_name(r.key.race)), r.key.diagnosis};
    for (auto c : kAllCategories) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", r.rate[c]);
      row.emplace_back(buf);
    }
    csv::write_row(out, row);
  }
}

}  // namespace testinj
