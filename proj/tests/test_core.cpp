#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "synthtext/corpus.hpp"
#include "synthtext/rng.hpp"
#include "synthtext/stemmer.hpp"
#include "synthtext/utf8.hpp"

using namespace synthtext;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  Rng c(1);
  for (int i = 0; i < 1000; ++i) CHECK(c.below(7) < 7);
}

TEST_CASE("rng shuffle is a permutation and seed-stable") {
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> w = v;
  Rng a(9), b(9);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::multiset<int> s(v.begin(), v.end());
  CHECK(s == std::multiset<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("rng categorical follows weights") {
  Rng r(5);
  std::vector<double> weights{1.0, 3.0};
  int ones = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ones += r.categorical(weights) == 1;
  const double p = static_cast<double>(ones) / n;
  CHECK(p > 0.75 - 3 * 0.0031);  // 3 SE of 0.75
  CHECK(p < 0.75 + 3 * 0.0031);
}

TEST_CASE("stage_seed separates stages") {
  CHECK(stage_seed(1, "a") != stage_seed(1, "b"));
  CHECK(stage_seed(1, "a") != stage_seed(2, "a"));
  CHECK(stage_seed(1, "a") == stage_seed(1, "a"));
}

TEST_CASE("utf8 round trip and truncation") {
  const std::string s = "aé中\U0001F600!";
  auto cs = utf8_decode(s);
  CHECK(cs.size() == 5);
  CHECK(utf8_encode(cs) == s);
  CHECK(utf8_length(s) == 5);
  CHECK(utf8_truncate(s, 2) == "aé");
  CHECK(utf8_truncate(s, 99) == s);
}

TEST_CASE("corpus from_records derives users and counts") {
  Corpus c = Corpus::from_records(
      {{"u1", "hello"}, {"u2", "there"}, {"u1", "again"}});
  CHECK(c.size() == 3);
  CHECK(c.users() == std::vector<std::string>{"u1", "u2"});
  CHECK(c.per_user_counts().at("u1") == 2);
  CHECK(c.per_user_counts().at("u2") == 1);
  CHECK(c.indices_of("u1") == std::vector<std::size_t>{0, 2});
  CHECK_THROWS(Corpus::from_records({{"", "x"}}));
}

TEST_CASE("ingest jsonl with clamp and errors") {
  const std::string path = temp_path("synthtext_ingest_test.jsonl");
  {
    std::ofstream out(path);
    out << R"({"user_id":"u1","text":"short"})" << "\n";
    out << R"({"user_id":"u2","text":")" << std::string(150, 'x') << R"("})" << "\n";
  }
  IngestStats stats;
  Corpus c = ingest(path, CorpusFormat::jsonl, &stats);
  CHECK(c.size() == 2);
  CHECK(utf8_length(c.records()[1].text) == 140);
  CHECK(stats.truncated == 1);

  {
    std::ofstream out(path);
    out << R"({"user_id":"","text":"x"})" << "\n";
  }
  CHECK_THROWS_WITH_AS(ingest(path, CorpusFormat::jsonl), doctest::Contains("line 1"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("ingest csv") {
  const std::string path = temp_path("synthtext_ingest_test.csv");
  {
    std::ofstream out(path);
    out << "user_id,text\n";
    out << "u1,\"hello, world\"\n";
    out << "u2,plain\n";
  }
  Corpus c = ingest(path, CorpusFormat::csv);
  CHECK(c.size() == 2);
  CHECK(c.records()[0].text == "hello, world");
  std::remove(path.c_str());
}

TEST_CASE("write then ingest round-trips") {
  Corpus c = Corpus::from_records({{"u1", "tweet \"quoted\" text"}, {"u2", "über"}});
  const std::string path = temp_path("synthtext_roundtrip.jsonl");
  write_jsonl(c, path);
  Corpus d = ingest(path, CorpusFormat::jsonl);
  REQUIRE(d.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(d.records()[i].user_id == c.records()[i].user_id);
    CHECK(d.records()[i].text == c.records()[i].text);
  }
  std::remove(path.c_str());
}

TEST_CASE("split is a seeded per-user partition") {
  std::vector<TweetRecord> records;
  for (int i = 0; i < 10; ++i) records.push_back({"u1", "a" + std::to_string(i)});
  for (int i = 0; i < 3; ++i) records.push_back({"u2", "b" + std::to_string(i)});
  Corpus c = Corpus::from_records(records);

  SplitPair s = split(c, 0.8, 17);
  CHECK(s.attack.per_user_counts().at("u1") == 8);  // round(0.8 * 10)
  CHECK(s.release.per_user_counts().at("u1") == 2);
  CHECK(s.attack.per_user_counts().at("u2") == 2);  // round(2.4), clamped to <= 2
  CHECK(s.release.per_user_counts().at("u2") == 1);
  CHECK(s.attack.same_users(s.release));

  // Partition: every original text appears exactly once across halves.
  std::multiset<std::string> seen;
  for (const auto& r : s.attack.records()) seen.insert(r.text);
  for (const auto& r : s.release.records()) seen.insert(r.text);
  std::multiset<std::string> expected;
  for (const auto& r : records) expected.insert(r.text);
  CHECK(seen == expected);

  SplitPair s2 = split(c, 0.8, 17);
  CHECK(s2.attack.records().size() == s.attack.records().size());
  for (std::size_t i = 0; i < s.attack.size(); ++i) {
    CHECK(s2.attack.records()[i].text == s.attack.records()[i].text);
  }

  Corpus bad = Corpus::from_records({{"u1", "only"}, {"u2", "x"}, {"u2", "y"}});
  CHECK_THROWS_WITH_AS(split(bad, 0.5, 1), doctest::Contains("u1"), std::runtime_error);
}

TEST_CASE("build_vocab ordering and thresholds") {
  Corpus c = Corpus::from_records({{"u1", "aab"}, {"u2", "ab"}});
  CharVocab v1 = build_vocab(c, 1);
  REQUIRE(v1.symbols().size() == 2);
  CHECK(v1.symbols()[0] == U'a');  // higher frequency first
  CHECK(v1.symbols()[1] == U'b');

  CharVocab v3 = build_vocab(c, 3);
  REQUIRE(v3.symbols().size() == 1);
  CHECK(v3.symbols()[0] == U'a');
  auto enc = v3.encode("ab");
  REQUIRE(enc.size() == 3);
  CHECK(enc[0] == CharVocab::kReserved);  // first real symbol slot
  CHECK(enc[1] == CharVocab::kUnk);
  CHECK(enc[2] == CharVocab::kEos);
}

TEST_CASE("vocab encode/decode round trip") {
  Corpus c = Corpus::from_records({{"u1", "hello world"}, {"u2", "hello there"}});
  CharVocab v = build_vocab(c, 1);
  const std::string text = "hello there world";
  auto enc = v.encode(text);
  CHECK(enc.back() == CharVocab::kEos);
  CHECK(std::count(enc.begin(), enc.end(), CharVocab::kEos) == 1);
  CHECK(v.decode(enc) == text);
}

TEST_CASE("fixture corpus is deterministic and carries the target term") {
  Corpus a = make_fixture_corpus(4, 30, 50, 0.5, 3);
  Corpus b = make_fixture_corpus(4, 30, 50, 0.5, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.records()[i].text == b.records()[i].text);
  CHECK(a.user_count() == 4);
  int with_term = 0;
  for (const auto& r : a.records()) {
    if (r.text.find(kFixtureTargetTerm) != std::string::npos) ++with_term;
  }
  const double frac = static_cast<double>(with_term) / static_cast<double>(a.size());
  CHECK(frac > 0.08);
  CHECK(frac < 0.35);
}

TEST_CASE("stemmer matches Porter reference pairs") {
  // Reference pairs from the published Porter test vocabulary.
  CHECK(stem("running") == "run");
  CHECK(stem("cats") == "cat");
  CHECK(stem("caresses") == "caress");
  CHECK(stem("ponies") == "poni");
  CHECK(stem("agreed") == "agre");
  CHECK(stem("plastered") == "plaster");
  CHECK(stem("motoring") == "motor");
  CHECK(stem("sing") == "sing");
  CHECK(stem("conflated") == "conflat");
  CHECK(stem("hopping") == "hop");
  CHECK(stem("falling") == "fall");
  CHECK(stem("happy") == "happi");
  CHECK(stem("relational") == "relat");
  CHECK(stem("conditional") == "condit");
  CHECK(stem("vietnamization") == "vietnam");
  CHECK(stem("predication") == "predic");
  CHECK(stem("triplicate") == "triplic");
  CHECK(stem("hopeful") == "hope");
  CHECK(stem("goodness") == "good");
  CHECK(stem("formative") == "form");
  CHECK(stem("adjustment") == "adjust");
  CHECK(stem("dependent") == "depend");
  CHECK(stem("probate") == "probat");
  CHECK(stem("controller") == "control");
  CHECK(stem("rate") == "rate");
  CHECK(stem("cease") == "ceas");
}

TEST_CASE("stemmer pass-through rules") {
  CHECK(stem("#running") == "#running");
  CHECK(stem("@mention") == "@mention");
  CHECK(stem("3rd") == "3rd");
  CHECK(stem("cafés") == "cafés");  // non-ascii passes through
}
