#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "testinj/error.hpp"
#include "testinj/porter.hpp"
#include "testinj/wordnet.hpp"

namespace testinj {

enum class TermCategory { Evidential = 0, Judgemental = 1, Negative = 2, Stigmatizing = 3 };

inline constexpr std::array<TermCategory, 4> kAllCategories = {
    TermCategory::Evidential, TermCategory::Judgemental, TermCategory::Negative,
    TermCategory::Stigmatizing};

inline constexpr std::size_t index_of(TermCategory c) { return static_cast<std::size_t>(c); }

// Singular form, used in lexicon files.
inline std::string_view category_name(TermCategory c) {
  switch (c) {
    case TermCategory::Evidential: return "evidential";
    case TermCategory::Judgemental: return "judgemental";
    case TermCategory::Negative: return "negative";
    case TermCategory::Stigmatizing: return "stigmatizing";
  }
  return "?";
}

// Plural form, used as dataset column names.
inline std::string_view category_column(TermCategory c) {
  switch (c) {
    case TermCategory::Evidential: return "evidentials";
    case TermCategory::Judgemental: return "judgementals";
    case TermCategory::Negative: return "negatives";
    case TermCategory::Stigmatizing: return "stigmatizing";
  }
  return "?";
}

inline std::optional<TermCategory> parse_category(std::string_view s) {
  std::string l(s);
  for (auto& ch : l) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (auto c : kAllCategories)
    if (l == category_name(c) || l == category_column(c)) return c;
  if (l == "judgmental" || l == "judgmentals") return TermCategory::Judgemental;
  return std::nullopt;
}

// Per-category tallies indexed by TermCategory.
template <class T>
struct PerCategory {
  std::array<T, 4> values{};

  T& operator[](TermCategory c) { return values[index_of(c)]; }
  const T& operator[](TermCategory c) const { return values[index_of(c)]; }
  bool operator==(const PerCategory&) const = default;
};

using CategoryCounts = PerCategory<std::size_t>;

inline bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}

// Lowercase; split on anything that is not a letter, digit or hyphen.
// Hyphens are kept only between word characters ("non-compliant"), so
// leading/trailing/isolated hyphens never form tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '-') cur.pop_back();
    std::size_t lead = 0;
    while (lead < cur.size() && cur[lead] == '-') ++lead;
    if (lead < cur.size()) tokens.push_back(cur.substr(lead));
    cur.clear();
  };
  for (char raw : text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (is_token_char(c)) cur.push_back(c);
    else flush();
  }
  flush();
  return tokens;
}

class Term {
 public:
  static constexpr std::size_t kMaxTokens = 3;

  // Validates: 1-3 tokens of [a-z0-9] with internal hyphens.
  explicit Term(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty() || tokens_.size() > kMaxTokens)
      throw ValidationError("term must have 1-3 tokens");
    for (const auto& t : tokens_) {
      if (t.empty() || t.front() == '-' || t.back() == '-')
        throw ValidationError("invalid term token '" + t + "'");
      for (char c : t)
        if (!is_token_char(c)) throw ValidationError("invalid term token '" + t + "'");
    }
  }

  // Lowercases and splits on whitespace; returns nullopt if invalid.
  static std::optional<Term> from_text(std::string_view text) {
    std::vector<std::string> toks;
    std::string cur;
    for (char raw : text) {
      char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
      if (c == ' ' || c == '\t' || c == '_') {
        if (!cur.empty()) toks.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) toks.push_back(std::move(cur));
    try {
      return Term(std::move(toks));
    } catch (const ValidationError&) {
      return std::nullopt;
    }
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  std::string text() const {
    std::string s;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (i) s.push_back(' ');
      s += tokens_[i];
    }
    return s;
  }

  auto operator<=>(const Term& o) const { return text() <=> o.text(); }
  bool operator==(const Term& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
};

class Lexicon {
 public:
  bool add(TermCategory c, Term t) { return terms_[index_of(c)].insert(std::move(t)).second; }

  const std::set<Term>& terms(TermCategory c) const { return terms_[index_of(c)]; }
  std::size_t size(TermCategory c) const { return terms(c).size(); }

  bool contains(TermCategory c, const Term& t) const { return terms(c).count(t) != 0; }
  bool contains(TermCategory c, std::string_view text) const {
    auto t = Term::from_text(text);
    return t && contains(c, *t);
  }

  bool complete() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& s) { return !s.empty(); });
  }

  bool superset_of(const Lexicon& other) const {
    for (auto c : kAllCategories)
      for (const auto& t : other.terms(c))
        if (!contains(c, t)) return false;
    return true;
  }

  bool operator==(const Lexicon&) const = default;

 private:
  std::array<std::set<Term>, 4> terms_;
};

// `category<TAB>term` per line; blank lines and '#' comments ignored.
inline Lexicon load_base_lexicon(std::istream& in, const std::string& source = "<lexicon>") {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, 1, "expected category<TAB>term");
    auto cat = parse_category(std::string_view(line).substr(0, tab));
    if (!cat)
      throw ParseError(source, lineno, 1, "unknown category '" + line.substr(0, tab) + "'");
    auto term = Term::from_text(std::string_view(line).substr(tab + 1));
    if (!term) throw ParseError(source, lineno, tab + 2, "invalid term '" + line.substr(tab + 1) + "'");
    lex.add(*cat, std::move(*term));
  }
  if (!lex.complete()) {
    for (auto c : kAllCategories)
      if (lex.size(c) == 0)
        throw ParseError(source, lineno, 0,
                         "category '" + std::string(category_name(c)) + "' has no terms");
  }
  return lex;
}

// Same TSV format, sorted by (category, term).
inline void write_lexicon(std::ostream& out, const Lexicon& lex) {
  for (auto c : kAllCategories)
    for (const auto& t : lex.terms(c)) out << category_name(c) << '\t' << t.text() << '\n';
}

inline Term stem_term(const Term& t) {
  std::vector<std::string> toks;
  toks.reserve(t.size());
  for (const auto& tok : t.tokens()) toks.push_back(stem(tok));
  return Term(std::move(toks));
}

inline constexpr std::size_t kSynonymsPerTerm = 5;

// Adds the stemmed variant of every term and, for single-token terms, the
// first five usable WordNet synonyms. A term missing from the database is
// looked up by its stem instead. Synonyms that do not form a valid term
// (more than three words, punctuation) are skipped and do not count.
inline Lexicon expand_lexicon(const Lexicon& lex, const SynonymDatabase& syn) {
  Lexicon out = lex;
  for (auto c : kAllCategories) {
    for (const auto& term : lex.terms(c)) {
      Term stemmed = stem_term(term);
      out.add(c, stemmed);
      if (term.size() != 1) continue;
      const auto* list = &syn.synonyms(term.tokens()[0]);
      if (list->empty()) list = &syn.synonyms(stemmed.tokens()[0]);
      std::size_t taken = 0;
      for (const auto& s : *list) {
        if (taken == kSynonymsPerTerm) break;
        if (auto t = Term::from_text(s)) {
          out.add(c, std::move(*t));
          ++taken;
        }
      }
    }
  }
  return out;
}

// Precompiled n-gram sets for repeated matching.
class LexiconMatcher {
 public:
  explicit LexiconMatcher(const Lexicon& lex) {
    for (auto c : kAllCategories) {
      for (const auto& t : lex.terms(c)) {
        sets_[index_of(c)].insert(t.text());
        max_len_[index_of(c)] = std::max(max_len_[index_of(c)], t.size());
      }
    }
  }

  // Per category: greedy longest match, left to right, non-overlapping.
  CategoryCounts count(const std::vector<std::string>& tokens) const {
    CategoryCounts counts;
    std::string key;
    for (auto c : kAllCategories) {
      const auto& set = sets_[index_of(c)];
      const std::size_t max_len = max_len_[index_of(c)];
      std::size_t i = 0;
      while (i < tokens.size()) {
        std::size_t matched = 0;
        for (std::size_t len = std::min(max_len, tokens.size() - i); len >= 1; --len) {
          key.clear();
          for (std::size_t k = 0; k < len; ++k) {
            if (k) key.push_back(' ');
            key += tokens[i + k];
          }
          if (set.count(key)) {
            matched = len;
            break;
          }
        }
        if (matched) {
          ++counts[c];
          i += matched;
        } else {
          ++i;
        }
      }
    }
    return counts;
  }

  CategoryCounts count(std::string_view text) const { return count(tokenize(text)); }

 private:
  std::array<std::unordered_set<std::string>, 4> sets_;
  std::array<std::size_t, 4> max_len_{};
};

inline CategoryCounts count_matches(std::string_view text, const Lexicon& lex) {
  return LexiconMatcher(lex).count(text);
}

}  // namespace testinj
