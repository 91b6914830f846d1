#include <doctest.h>

#include <cmath>

#include "synthtext/features.hpp"

using namespace synthtext;

TEST_CASE("tokenize rules") {
  CHECK(tokenize("Go #TeamGB, now!") ==
        std::vector<std::string>{"go", "#teamgb", "now"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("@BBC @bbc") == std::vector<std::string>{"@bbc", "@bbc"});
  CHECK(tokenize("  (hello)  world... ") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("# @ !!") == std::vector<std::string>{});  // bare markers dropped
  CHECK(tokenize_preserve_case("Go NOW!") == std::vector<std::string>{"Go", "NOW"});
}

TEST_CASE("fit_ngram_space document-frequency filter") {
  // "a" is in 100% of tweets (> 50%); the rest are in one tweet (< 2).
  Corpus c1 = Corpus::from_records({{"u1", "a b"}, {"u1", "a c"}, {"u2", "a d"}});
  auto s1 = fit_ngram_space(c1, 1);
  CHECK(s1->cols() == 0);

  // x and y each in 2/4 tweets = exactly 50%: kept.
  Corpus c2 = Corpus::from_records(
      {{"u1", "x y"}, {"u1", "x y"}, {"u2", "z w"}, {"u2", "q r"}});
  auto s2 = fit_ngram_space(c2, 1);
  REQUIRE(s2->cols() == 2);
  CHECK(s2->names == std::vector<std::string>{"x", "y"});  // lexicographic
}

TEST_CASE("bigram space and extraction") {
  Corpus c = Corpus::from_records(
      {{"u1", "big cats run"}, {"u2", "big cats sleep"}, {"u2", "dogs bark loud"}});
  auto s = fit_ngram_space(c, 2);
  // "big cat" (stemmed) is the only bigram in >= 2 tweets; 2/3 <= 50%? No:
  // 2/3 > 50% so it is dropped too.
  CHECK(s->cols() == 0);

  Corpus c2 = Corpus::from_records({{"u1", "big cats run"},
                                    {"u2", "big cats sleep"},
                                    {"u2", "dogs bark loud"},
                                    {"u1", "dogs bark louder"},
                                    {"u1", "night owl"}});
  auto s2 = fit_ngram_space(c2, 2);
  REQUIRE(s2->cols() == 2);
  CHECK(s2->names == std::vector<std::string>{"big cat", "dog bark"});
  FeatureMatrix m = extract(s2, c2);
  CHECK(m.rows[0].get(s2->col_of("big cat")) == 1.0);
  CHECK(m.rows[3].get(s2->col_of("dog bark")) == 1.0);
  CHECK(m.rows[4].items.empty());
}

TEST_CASE("char unigram and bigram extraction") {
  auto su = make_fixed_space(FeatureKind::char_unigram);
  CHECK(su->cols() == 26);
  FeatureMatrix mu = extract(su, std::vector<TweetRecord>{{"u", "abca"}});
  CHECK(mu.rows[0].get(su->col_of("char_a")) == 2.0);
  CHECK(mu.rows[0].get(su->col_of("char_b")) == 1.0);
  CHECK(mu.rows[0].get(su->col_of("char_c")) == 1.0);
  double total = 0;
  for (auto& [col, v] : mu.rows[0].items) total += v;
  CHECK(total == 4.0);

  auto sb = make_fixed_space(FeatureKind::char_bigram);
  CHECK(sb->cols() == 676);
  FeatureMatrix mb = extract(sb, std::vector<TweetRecord>{{"u", "a b-C"}});
  // Letters-only stream is "abc".
  CHECK(mb.rows[0].get(sb->col_of("cb_ab")) == 1.0);
  CHECK(mb.rows[0].get(sb->col_of("cb_bc")) == 1.0);
  CHECK(mb.rows[0].items.size() == 2);
}

TEST_CASE("stylometric block") {
  auto s = make_fixed_space(FeatureKind::stylometric);
  FeatureMatrix m =
      extract(s, std::vector<TweetRecord>{{"u", "Go #TeamGB now a1b2 the THE"}});
  const auto& r = m.rows[0];
  CHECK(r.get(s->col_of("word_count")) == 6.0);
  CHECK(r.get(s->col_of("digit_count")) == 2.0);
  CHECK(r.get(s->col_of("shape_capitalized")) == 1.0);  // "Go"
  CHECK(r.get(s->col_of("shape_upper")) == 1.0);        // "THE"
  CHECK(r.get(s->col_of("fw_the")) == 2.0);  // case-insensitive
  CHECK(r.get(s->col_of("wlen_2")) == 1.0);  // "Go"
  CHECK(r.get(s->col_of("wlen_3")) == 3.0);  // "now", "the", "THE"
}

TEST_CASE("stylometric word lengths and richness") {
  auto s = make_fixed_space(FeatureKind::stylometric);
  FeatureMatrix m = extract(s, std::vector<TweetRecord>{{"u", "aa bb aa cccc"}});
  const auto& r = m.rows[0];
  CHECK(r.get(s->col_of("word_count")) == 4.0);
  CHECK(r.get(s->col_of("wlen_2")) == 3.0);
  CHECK(r.get(s->col_of("wlen_4")) == 1.0);
  CHECK(r.get(s->col_of("type_token_ratio")) == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("pos tagger and tag pairs") {
  CHECK(pos_tag("the") == PosTag::det);
  CHECK(pos_tag("quickly") == PosTag::adv);
  CHECK(pos_tag("running") == PosTag::verb);
  CHECK(pos_tag("dog") == PosTag::noun);
  auto s = make_fixed_space(FeatureKind::stylometric);
  FeatureMatrix m = extract(s, std::vector<TweetRecord>{{"u", "the dog"}});
  CHECK(m.rows[0].get(s->col_of("tagpair_DET_NOUN")) == 1.0);
}

TEST_CASE("collapse_rows means per user in first-appearance order") {
  auto s = make_space(FeatureKind::unigram, {"f0", "f1"});
  FeatureMatrix m;
  m.space = s;
  SparseRow r1;
  r1.add(0, 1.0);
  SparseRow r2;
  r2.add(0, 3.0);
  r2.add(1, 2.0);
  SparseRow r3;
  r3.add(1, 5.0);
  m.rows = {r1, r2, r3};
  m.row_labels = {"b", "b", "a"};
  FeatureMatrix c = collapse_rows(m, CollapseMode::mean);
  REQUIRE(c.n_rows() == 2);
  CHECK(c.row_labels == std::vector<std::string>{"b", "a"});
  CHECK(c.rows[0].get(0) == 2.0);
  CHECK(c.rows[0].get(1) == 1.0);
  CHECK(c.rows[1].get(1) == 5.0);
}

TEST_CASE("normalize: train-fitted z-score then row unit norm") {
  auto s = make_space(FeatureKind::unigram, {"f0", "f1"});
  FeatureMatrix train;
  train.space = s;
  {
    SparseRow a;
    a.add(0, 1.0);
    a.add(1, 5.0);
    SparseRow b;
    b.add(0, 3.0);
    b.add(1, 5.0);
    train.rows = {a, b};
    train.row_labels = {"u1", "u2"};
  }
  FeatureMatrix test;
  test.space = s;
  {
    SparseRow a;
    a.add(0, 3.0);
    a.add(1, 5.0);
    test.rows = {a};
    test.row_labels = {"u1"};
  }
  auto [tr, te] = normalize(train, test);
  // Column 0: mean 2, population std 1 -> {-1, +1}; column 1 constant ->
  // untouched (stays 5). Rows then unit-normed.
  const double n0 = std::sqrt(1.0 + 25.0);
  CHECK(tr.rows[0].get(0) == doctest::Approx(-1.0 / n0));
  CHECK(tr.rows[0].get(1) == doctest::Approx(5.0 / n0));
  CHECK(te.rows[0].get(0) == doctest::Approx(1.0 / n0));
  // Inputs unmodified.
  CHECK(train.rows[0].get(0) == 1.0);
  // Fit stats recorded on the returned space.
  CHECK(tr.space->has_fit_stats);
}

TEST_CASE("row [3,4] unit norm") {
  auto s = make_space(FeatureKind::unigram, {"f0", "f1"});
  FeatureMatrix train;
  train.space = s;
  SparseRow a;
  a.add(0, 3.0);
  a.add(1, 4.0);
  SparseRow b;  // second row so no column has zero variance... keep columns varying
  b.add(0, 3.0);
  b.add(1, 4.0);
  train.rows = {a, b};
  train.row_labels = {"u1", "u2"};
  FeatureMatrix test = train;
  // Both columns constant -> z-score leaves them, so only row norm acts.
  auto [tr, te] = normalize(train, test);
  CHECK(tr.rows[0].get(0) == doctest::Approx(0.6));
  CHECK(tr.rows[0].get(1) == doctest::Approx(0.8));
}

TEST_CASE("dense and sparse conversions agree") {
  auto s = make_space(FeatureKind::unigram, {"f0", "f1", "f2"});
  FeatureMatrix m;
  m.space = s;
  SparseRow a;
  a.add(2, 7.0);
  a.add(0, 1.0);
  m.rows = {a};
  m.row_labels = {"u"};
  Eigen::MatrixXd d = to_dense(m);
  REQUIRE(d.rows() == 1);
  REQUIRE(d.cols() == 3);
  CHECK(d(0, 0) == 1.0);
  CHECK(d(0, 1) == 0.0);
  CHECK(d(0, 2) == 7.0);
  Eigen::SparseMatrix<double> sp = to_sparse(m);
  CHECK(Eigen::MatrixXd(sp) == d);
}
