#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "testinj/csv.hpp"
#include "testinj/error.hpp"

namespace testinj {

enum class Race { Asian, Black, Latino, White };
enum class Gender { Female, Male };
enum class AgeGroup { Child, Adult, Senior };

inline std::string_view race_name(Race r) {
  switch (r) {
    case Race::Asian: return "Asian";
    case Race::Black: return "Black";
    case Race::Latino: return "Latino";
    case Race::White: return "White";
  }
  return "?";
}

inline std::string_view gender_name(Gender g) { return g == Gender::Female ? "Female" : "Male"; }

inline std::string_view age_group_name(AgeGroup a) {
  switch (a) {
    case AgeGroup::Child: return "Child";
    case AgeGroup::Adult: return "Adult";
    case AgeGroup::Senior: return "Senior";
  }
  return "?";
}

struct RawRecord {
  std::string patient_id;
  std::string gender;
  std::string ethnicity;
  double age_years = 0;
  std::string diagnosis;
  std::string note_text;
};

namespace corpus_detail {

inline std::string lower_trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace corpus_detail

// Case-insensitive ethnicity prefix table. The longest matching prefix
// decides; an entry with no race marks the prefix as excluded.
class RaceMap {
 public:
  struct Entry {
    std::string prefix;  // lowercase
    std::optional<Race> race;
  };

  static RaceMap defaults() {
    RaceMap m;
    m.add("asian", Race::Asian);
    m.add("black", Race::Black);
    m.add("hispanic", Race::Latino);
    m.add("latino", Race::Latino);
    m.add("white", Race::White);
    for (const char* ex : {"unknown/not specified", "unknown", "multi race ethnicity",
                           "multi-race ethnicity", "other", "unable to obtain",
                           "patient declined to answer"})
      m.add(ex, std::nullopt);
    return m;
  }

  // `prefix<TAB>race` lines; race is Asian|Black|Latino|White|Excluded.
  static RaceMap load(std::istream& in, const std::string& source) {
    RaceMap m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(source, lineno, 1, "expected prefix<TAB>race");
      std::string value = corpus_detail::lower_trim(std::string_view(line).substr(tab + 1));
      std::optional<Race> race;
      if (value == "asian") race = Race::Asian;
      else if (value == "black") race = Race::Black;
      else if (value == "latino") race = Race::Latino;
      else if (value == "white") race = Race::White;
      else if (value != "excluded")
        throw ParseError(source, lineno, tab + 2, "unknown race '" + value + "'");
      m.add(line.substr(0, tab), race);
    }
    return m;
  }

  void add(std::string_view prefix, std::optional<Race> race) {
    std::string p = corpus_detail::lower_trim(prefix);
    for (auto& e : entries_)
      if (e.prefix == p) {
        e.race = race;
        return;
      }
    entries_.push_back({std::move(p), race});
  }

  std::optional<Race> code(std::string_view ethnicity) const {
    std::string e = corpus_detail::lower_trim(ethnicity);
    const Entry* best = nullptr;
    for (const auto& entry : entries_)
      if (e.compare(0, entry.prefix.size(), entry.prefix) == 0 &&
          (!best || entry.prefix.size() > best->prefix.size()))
        best = &entry;
    return best ? best->race : std::nullopt;
  }

 private:
  std::vector<Entry> entries_;
};

// nullopt means the record is excluded from the study.
inline std::optional<Race> code_race(std::string_view ethnicity,
                                     const RaceMap& map = RaceMap::defaults()) {
  return map.code(ethnicity);
}

inline std::optional<Gender> code_gender(std::string_view gender) {
  std::string g = corpus_detail::lower_trim(gender);
  if (g == "f" || g == "female") return Gender::Female;
  if (g == "m" || g == "male") return Gender::Male;
  return std::nullopt;
}

// Child <= 15 < Adult <= 64 < Senior. Fractional ages fall between the
// integer boundaries: anything below 16 is a child, 65 and above a senior.
inline AgeGroup age_group(double age_years) {
  if (!(age_years >= 0) || !std::isfinite(age_years))
    throw ValidationError("age must be a non-negative number, got " + std::to_string(age_years));
  if (age_years < 16) return AgeGroup::Child;
  if (age_years < 65) return AgeGroup::Adult;
  return AgeGroup::Senior;
}

inline bool is_newborn(std::string_view diagnosis) {
  return corpus_detail::lower_trim(diagnosis) == "newborn";
}

// Drops uncodable ethnicities, then drops every record of a patient whose
// only diagnosis is "newborn".
inline std::vector<RawRecord> filter_records(const std::vector<RawRecord>& records,
                                             const RaceMap& map = RaceMap::defaults()) {
  std::vector<const RawRecord*> coded;
  for (const auto& r : records)
    if (map.code(r.ethnicity)) coded.push_back(&r);

  std::unordered_map<std::string, bool> has_other_diagnosis;
  for (const auto* r : coded) {
    bool& other = has_other_diagnosis[r->patient_id];
    if (!is_newborn(r->diagnosis)) other = true;
  }
  std::vector<RawRecord> out;
  for (const auto* r : coded)
    if (has_other_diagnosis[r->patient_id]) out.push_back(*r);
  return out;
}

struct PatientKey {
  std::string patient_id;
  Gender gender;
  Race race;
  std::string diagnosis;

  auto operator<=>(const PatientKey&) const = default;
};

struct Patient {
  PatientKey key;
  AgeGroup age_group = AgeGroup::Adult;
  std::vector<std::string> notes;
  std::size_t record_count = 0;
};

// Groups by (patient_id, gender, race, diagnosis); age is not part of the
// key and the first record's age group wins. Output is ordered by first
// appearance of each key.
inline std::vector<Patient> merge_patients(const std::vector<RawRecord>& records,
                                           const RaceMap& map = RaceMap::defaults()) {
  std::vector<Patient> out;
  std::map<PatientKey, std::size_t> index;
  for (const auto& r : records) {
    auto race = map.code(r.ethnicity);
    if (!race) throw ValidationError("record for patient " + r.patient_id + " has uncodable ethnicity");
    auto gender = code_gender(r.gender);
    if (!gender) throw ValidationError("record for patient " + r.patient_id + " has unknown gender '" + r.gender + "'");
    PatientKey key{r.patient_id, *gender, *race, r.diagnosis};
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      out.push_back(Patient{key, age_group(r.age_years), {}, 0});
    }
    Patient& p = out[it->second];
    p.notes.push_back(r.note_text);
    ++p.record_count;
  }
  return out;
}

inline constexpr std::array<std::string_view, 6> kRecordColumns = {
    "patient_id", "gender", "ethnicity", "age", "diagnosis", "note_text"};

// Reads `patient_id,gender,ethnicity,age,diagnosis,note_text` (any column
// order, extra columns ignored).
inline std::vector<RawRecord> read_records(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source);
  auto header = reader.next();
  if (!header || (header->size() == 1 && (*header)[0].empty()))
    throw ParseError(source, 1, 1, "empty input: missing header row");
  std::array<std::size_t, 6> col{};
  for (std::size_t k = 0; k < kRecordColumns.size(); ++k) {
    auto it = std::find_if(header->begin(), header->end(), [&](const std::string& h) {
      return corpus_detail::lower_trim(h) == kRecordColumns[k];
    });
    if (it == header->end())
      throw ParseError(source, 1, 1, "missing column '" + std::string(kRecordColumns[k]) + "'");
    col[k] = static_cast<std::size_t>(it - header->begin());
  }
  std::vector<RawRecord> out;
  while (auto row = reader.next()) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != header->size())
      throw ParseError(source, reader.line(), 1,
                       "expected " + std::to_string(header->size()) + " fields, got " +
                           std::to_string(row->size()));
    RawRecord r;
    r.patient_id = (*row)[col[0]];
    r.gender = (*row)[col[1]];
    r.ethnicity = (*row)[col[2]];
    const std::string& age = (*row)[col[3]];
    double value = 0;
    auto [p, ec] = std::from_chars(age.data(), age.data() + age.size(), value);
    if (ec != std::errc() || p != age.data() + age.size() || value < 0)
      throw ParseError(source, reader.line(), col[3] + 1, "bad age '" + age + "'");
    r.age_years = value;
    r.diagnosis = (*row)[col[4]];
    r.note_text = (*row)[col[5]];
    if (r.patient_id.empty()) throw ParseError(source, reader.line(), col[0] + 1, "empty patient_id");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw ParseError(source, reader.line(), 1, "no records");
  return out;
}

inline std::vector<RawRecord> read_records_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  return read_records(in, path.string());
}

// A manifest lists one CSV path per line (relative to the manifest's directory).
inline std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ParseError(manifest.string(), 0, 0, "cannot open manifest");
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::filesystem::path p(line.substr(first));
    out.push_back(p.is_absolute() ? p : manifest.parent_path() / p);
  }
  return out;
}

}  // namespace testinj
