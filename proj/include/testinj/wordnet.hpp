#pragma once

// Reader for the plain-text WordNet 3.x database (index.<pos> / data.<pos>).
//
// index line:  lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt offset...
// data line:   offset lex_filenum ss_type w_cnt(hex) word lex_id [word lex_id...] p_cnt ... | gloss
//
// Lines starting with a space are the licence preamble and are skipped.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "testinj/error.hpp"

namespace testinj {

struct WordNetFilePair {
  std::filesystem::path index;
  std::filesystem::path data;
};

class SynonymDatabase {
 public:
  SynonymDatabase() = default;

  // Synonyms for `lemma` (lowercase, multiword lemmas joined with '_').
  const std::vector<std::string>& synonyms(const std::string& lemma) const {
    static const std::vector<std::string> kEmpty;
    auto it = map_.find(lemma);
    return it == map_.end() ? kEmpty : it->second;
  }

  bool contains(const std::string& lemma) const { return map_.count(lemma) != 0; }
  std::size_t size() const { return map_.size(); }

  // Appends synonyms for `lemma`, skipping self and anything already present.
  void append(const std::string& lemma, const std::vector<std::string>& members) {
    auto& list = map_[lemma];
    for (const auto& m : members) {
      if (m == lemma) continue;
      if (std::find(list.begin(), list.end(), m) == list.end()) list.push_back(m);
    }
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> map_;
};

namespace wordnet_detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError::at_offset(p.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_uint(std::string_view s, std::size_t& out, int base = 10) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc() && p == s.data() + s.size();
}

inline std::string lower(std::string_view s) {
  std::string r(s);
  for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return r;
}

// Adjective members may carry a syntactic marker: "galore(ip)".
inline std::string strip_marker(std::string_view word) {
  auto paren = word.find('(');
  if (paren != std::string_view::npos && word.back() == ')') word = word.substr(0, paren);
  return lower(word);
}

// Members of the synset whose line starts at `offset` in `data`.
inline std::vector<std::string> synset_members(const std::string& data, const std::string& name,
                                               std::size_t offset) {
  if (offset >= data.size()) throw ParseError::at_offset(name, offset, "synset offset past end of file");
  if (offset > 0 && data[offset - 1] != '\n')
    throw ParseError::at_offset(name, offset, "synset offset is not at a line start");
  std::size_t eol = data.find('\n', offset);
  if (eol == std::string::npos) throw ParseError::at_offset(name, offset, "truncated synset line");
  std::string_view line(data.data() + offset, eol - offset);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto bar = line.find(" | ");
  auto fields = split_ws(bar == std::string_view::npos ? line : line.substr(0, bar));
  if (fields.size() < 4) throw ParseError::at_offset(name, offset, "truncated synset line");
  std::size_t self = 0;
  if (!parse_uint(fields[0], self) || self != offset)
    throw ParseError::at_offset(name, offset, "synset line does not start with its own offset");
  std::size_t count = 0;
  if (!parse_uint(fields[3], count, 16) || count == 0)
    throw ParseError::at_offset(name, offset, "bad word count");
  if (fields.size() < 4 + 2 * count) throw ParseError::at_offset(name, offset, "truncated word list");
  std::vector<std::string> members;
  members.reserve(count);
  for (std::size_t k = 0; k < count; ++k) members.push_back(strip_marker(fields[4 + 2 * k]));
  return members;
}

inline void load_pair(const WordNetFilePair& files, SynonymDatabase& db) {
  const std::string index = read_file(files.index);
  const std::string data = read_file(files.data);
  const std::string iname = files.index.string();
  const std::string dname = files.data.string();

  std::size_t pos = 0;
  while (pos < index.size()) {
    std::size_t eol = index.find('\n', pos);
    if (eol == std::string::npos)
      throw ParseError::at_offset(iname, pos, "truncated index line (missing newline)");
    std::string_view line(index.data() + pos, eol - pos);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == ' ') continue;

    auto f = split_ws(line);
    std::size_t synset_cnt = 0, p_cnt = 0;
    if (f.size() < 4 || !parse_uint(f[2], synset_cnt) || !parse_uint(f[3], p_cnt))
      throw ParseError::at_offset(iname, line_start, "malformed index line");
    const std::size_t offsets_at = 4 + p_cnt + 2;
    if (f.size() < offsets_at + synset_cnt)
      throw ParseError::at_offset(iname, line_start, "truncated index line");

    const std::string lemma = lower(f[0]);
    for (std::size_t k = 0; k < synset_cnt; ++k) {
      std::string_view off_text = f[offsets_at + k];
      std::size_t offset = 0;
      if (off_text.size() != 8 || !parse_uint(off_text, offset))
        throw ParseError::at_offset(iname, line_start, "malformed synset offset '" + std::string(off_text) + "'");
      db.append(lemma, synset_members(data, dname, offset));
    }
  }
}

}  // namespace wordnet_detail

// Pairs are read in the given order; a lemma's synonyms follow that order,
// then sense order in the index line, then member order inside each synset.
inline SynonymDatabase parse_wordnet(const std::vector<WordNetFilePair>& files) {
  SynonymDatabase db;
  for (const auto& pair : files) wordnet_detail::load_pair(pair, db);
  return db;
}

// Reads whichever of noun, verb, adj, adv (in that order) exist in `dir`.
inline SynonymDatabase parse_wordnet_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("WordNet directory not found: " + dir.string());
  std::vector<WordNetFilePair> files;
  for (const char* pos : {"noun", "verb", "adj", "adv"}) {
    fs::path idx = dir / (std::string("index.") + pos);
    fs::path dat = dir / (std::string("data.") + pos);
    if (fs::exists(idx) && fs::exists(dat)) files.push_back({idx, dat});
  }
  if (files.empty()) throw ValidationError("no index.*/data.* pairs in " + dir.string());
  return parse_wordnet(files);
}

}  // namespace testinj
