#pragma once

// Porter suffix-stripping stemmer, 1980 rule set (no later extensions).

#include <string>
#include <string_view>

namespace testinj {

namespace porter_detail {

class Stemmer {
 public:
  explicit Stemmer(std::string word) : w_(std::move(word)) {}

  std::string run() && {
    step1a();
    step1b();
    step1c();
    step2();
    step3();
    step4();
    step5a();
    step5b();
    return std::move(w_);
  }

 private:
  std::string w_;

  bool consonant(std::size_t i) const {
    switch (w_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 || !consonant(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in w_[0, len).
  int measure(std::size_t len) const {
    int m = 0;
    std::size_t i = 0;
    while (i < len && consonant(i)) ++i;
    while (i < len) {
      while (i < len && !consonant(i)) ++i;
      if (i >= len) break;
      while (i < len && consonant(i)) ++i;
      ++m;
    }
    return m;
  }

  bool has_vowel(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i)
      if (!consonant(i)) return true;
    return false;
  }

  bool double_consonant(std::size_t len) const {
    return len >= 2 && w_[len - 1] == w_[len - 2] && consonant(len - 1);
  }

  // *o: stem ends consonant-vowel-consonant, last consonant not w, x or y.
  bool cvc(std::size_t len) const {
    if (len < 3) return false;
    if (!consonant(len - 1) || consonant(len - 2) || !consonant(len - 3)) return false;
    char c = w_[len - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view s) const {
    return w_.size() >= s.size() && std::string_view(w_).substr(w_.size() - s.size()) == s;
  }

  std::size_t stem_len(std::string_view suffix) const { return w_.size() - suffix.size(); }

  void replace(std::string_view suffix, std::string_view with) {
    w_.resize(stem_len(suffix));
    w_.append(with);
  }

  struct Rule {
    std::string_view suffix;
    std::string_view replacement;
  };

  // Longest matching suffix wins; when its condition fails no shorter suffix is tried.
  template <std::size_t N, class Cond>
  void apply_longest(const Rule (&rules)[N], Cond cond) {
    const Rule* best = nullptr;
    for (const auto& r : rules)
      if (ends(r.suffix) && (!best || r.suffix.size() > best->suffix.size())) best = &r;
    if (best && cond(stem_len(best->suffix))) replace(best->suffix, best->replacement);
  }

  void step1a() {
    if (ends("sses")) replace("sses", "ss");
    else if (ends("ies")) replace("ies", "i");
    else if (ends("ss")) return;
    else if (ends("s")) replace("s", "");
  }

  void step1b() {
    if (ends("eed")) {
      if (measure(stem_len("eed")) > 0) replace("eed", "ee");
      return;
    }
    bool stripped = false;
    if (ends("ed") && has_vowel(stem_len("ed"))) {
      replace("ed", "");
      stripped = true;
    } else if (ends("ing") && has_vowel(stem_len("ing"))) {
      replace("ing", "");
      stripped = true;
    }
    if (!stripped) return;
    if (ends("at")) replace("at", "ate");
    else if (ends("bl")) replace("bl", "ble");
    else if (ends("iz")) replace("iz", "ize");
    else if (double_consonant(w_.size())) {
      char c = w_.back();
      if (c != 'l' && c != 's' && c != 'z') w_.pop_back();
    } else if (measure(w_.size()) == 1 && cvc(w_.size())) {
      w_.push_back('e');
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(stem_len("y"))) w_.back() = 'i';
  }

  void step2() {
    static constexpr Rule rules[] = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
    };
    apply_longest(rules, [this](std::size_t len) { return measure(len) > 0; });
  }

  void step3() {
    static constexpr Rule rules[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    };
    apply_longest(rules, [this](std::size_t len) { return measure(len) > 0; });
  }

  void step4() {
    static constexpr Rule rules[] = {
        {"al", ""},  {"ance", ""}, {"ence", ""}, {"er", ""},    {"ic", ""},   {"able", ""},
        {"ible", ""}, {"ant", ""}, {"ement", ""}, {"ment", ""}, {"ent", ""},  {"ion", ""},
        {"ou", ""},  {"ism", ""},  {"ate", ""},  {"iti", ""},   {"ous", ""},  {"ive", ""},
        {"ize", ""},
    };
    const Rule* best = nullptr;
    for (const auto& r : rules)
      if (ends(r.suffix) && (!best || r.suffix.size() > best->suffix.size())) best = &r;
    if (!best) return;
    std::size_t len = stem_len(best->suffix);
    if (measure(len) <= 1) return;
    if (best->suffix == "ion" && !(len > 0 && (w_[len - 1] == 's' || w_[len - 1] == 't'))) return;
    w_.resize(len);
  }

  void step5a() {
    if (!ends("e")) return;
    std::size_t len = stem_len("e");
    int m = measure(len);
    if (m > 1 || (m == 1 && !cvc(len))) w_.pop_back();
  }

  void step5b() {
    if (measure(w_.size()) > 1 && double_consonant(w_.size()) && w_.back() == 'l') w_.pop_back();
  }
};

}  // namespace porter_detail

// Input is expected lowercase. Tokens containing anything other than a-z
// (digits, hyphens) are returned unchanged.
inline std::string stem(std::string_view word) {
  if (word.empty()) return {};
  for (char c : word)
    if (c < 'a' || c > 'z') return std::string(word);
  return porter_detail::Stemmer(std::string(word)).run();
}

}  // namespace testinj
