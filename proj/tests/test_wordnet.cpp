#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "testinj/error.hpp"
#include "testinj/wordnet.hpp"

namespace fs = std::filesystem;
using testinj::ParseError;
using testinj::SynonymDatabase;

namespace {

const fs::path kFixture = fs::path(TESTINJ_SOURCE_DIR) / "tests" / "data" / "wordnet";

using Strings = std::vector<std::string>;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("testinj_wn_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Builds index/data text for one part of speech with correct byte offsets.
std::pair<std::string, std::string> build_pos(const std::vector<Strings>& synsets) {
  std::string data = "  1 header line\n";
  std::vector<std::pair<std::string, std::size_t>> senses;
  for (const auto& members : synsets) {
    const std::size_t off = data.size();
    char head[32];
    std::snprintf(head, sizeof head, "%08zu 03 n %02zx", off, members.size());
    data += head;
    for (const auto& m : members) data += " " + m + " 0";
    data += " 000 | gloss\n";
    for (const auto& m : members) senses.emplace_back(m, off);
  }
  std::map<std::string, std::vector<std::size_t>> by_lemma;
  for (const auto& [m, off] : senses) by_lemma[m].push_back(off);
  std::string index = "  1 header line\n";
  for (const auto& [lemma, offs] : by_lemma) {
    index += lemma + " n " + std::to_string(offs.size()) + " 0 " + std::to_string(offs.size()) + " 0";
    for (auto o : offs) {
      char buf[16];
      std::snprintf(buf, sizeof buf, " %08zu", o);
      index += buf;
    }
    index += "  \n";
  }
  return {index, data};
}

SynonymDatabase parse_single(const TempDir& dir, const std::string& index, const std::string& data) {
  write(dir.path() / "index.noun", index);
  write(dir.path() / "data.noun", data);
  return testinj::parse_wordnet({{dir.path() / "index.noun", dir.path() / "data.noun"}});
}

TEST(WordNet, TwoLemmaSynset) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}});
  auto db = parse_single(dir, index, data);
  EXPECT_EQ(db.synonyms("dog"), Strings{"domestic_dog"});
  EXPECT_EQ(db.synonyms("domestic_dog"), Strings{"dog"});
}

TEST(WordNet, MissingLemmaHasNoSynonyms) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}});
  auto db = parse_single(dir, index, data);
  EXPECT_TRUE(db.synonyms("cat").empty());
  EXPECT_FALSE(db.contains("cat"));
}

TEST(WordNet, SelfOnlySynsetGivesEmptyList) {
  TempDir dir;
  auto [index, data] = build_pos({{"lone"}});
  auto db = parse_single(dir, index, data);
  EXPECT_TRUE(db.synonyms("lone").empty());
}

TEST(WordNet, FixtureOrderingAcrossSensesAndFiles) {
  auto db = testinj::parse_wordnet_dir(kFixture);
  EXPECT_EQ(db.synonyms("dog"), (Strings{"domestic_dog", "canis_familiaris"}));
  EXPECT_EQ(db.synonyms("complaint"), (Strings{"ailment", "ill", "charge"}));
  EXPECT_EQ(db.synonyms("refuse"), (Strings{"decline", "deny"}));
  EXPECT_EQ(db.synonyms("combative"),
            (Strings{"battleful", "far_too_many_words_here", "bellicose", "o'clock", "belligerent", "militant",
                     "hostile", "truculent"}));
  EXPECT_TRUE(db.synonyms("lone").empty());
}

TEST(WordNet, NoLemmaMapsToItself) {
  auto db = testinj::parse_wordnet_dir(kFixture);
  for (const char* lemma : {"dog", "complaint", "refuse", "decline", "combative", "insist", "kick"})
    for (const auto& s : db.synonyms(lemma)) EXPECT_NE(s, lemma);
}

TEST(WordNet, ParsingIsDeterministic) {
  auto a = testinj::parse_wordnet_dir(kFixture);
  auto b = testinj::parse_wordnet_dir(kFixture);
  for (const char* lemma : {"dog", "complaint", "refuse", "combative"}) EXPECT_EQ(a.synonyms(lemma), b.synonyms(lemma));
}

TEST(WordNet, OffsetNotAtLineStartIsParseError) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}});
  const auto pos = index.find("00000016");
  ASSERT_NE(pos, std::string::npos);
  index.replace(pos, 8, "00000017");
  try {
    parse_single(dir, index, data);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("data.noun"), std::string::npos) << what;
    EXPECT_NE(what.find("17"), std::string::npos) << what;
  }
}

TEST(WordNet, OffsetPastEndIsParseError) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}});
  index.replace(index.find("00000016"), 8, "00099999");
  EXPECT_THROW(parse_single(dir, index, data), ParseError);
}

TEST(WordNet, TruncatedDataFileIsParseError) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}});
  data.resize(data.size() - 20);
  EXPECT_THROW(parse_single(dir, index, data), ParseError);
}

TEST(WordNet, MalformedOffsetTextIsParseError) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}});
  index.replace(index.find("00000016"), 8, "0000001x");
  EXPECT_THROW(parse_single(dir, index, data), ParseError);
}

TEST(WordNet, MismatchedSelfOffsetIsParseError) {
  TempDir dir;
  auto [index, data] = build_pos({{"dog", "domestic_dog"}, {"cat", "true_cat"}});
  // Point the first synset's own offset field somewhere else.
  data.replace(data.find("00000016"), 8, "00000099");
  EXPECT_THROW(parse_single(dir, index, data), ParseError);
}

TEST(WordNet, MissingDirectoryIsValidationError) {
  EXPECT_THROW(testinj::parse_wordnet_dir(kFixture / "does_not_exist"), testinj::ValidationError);
}

TEST(WordNet, DirectoryWithoutPairsIsValidationError) {
  TempDir dir;
  write(dir.path() / "index.noun", "");
  EXPECT_THROW(testinj::parse_wordnet_dir(dir.path()), testinj::ValidationError);
}

}  // namespace
