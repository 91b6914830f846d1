#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "synthtext/corpus.hpp"

namespace synthtext {

// The four utility scores for one release variant against the baseline.
struct UtilityReport {
  std::string release_id;
  double unigram_cosine = 0.0;
  double bigram_cosine = 0.0;
  double classifier_f1 = 0.0;
  double sentiment_cosine = 0.0;
};

struct SentimentLexicon {
  std::unordered_map<std::string, double> valence;
  int negation_window = 3;
  double negation_scale = -0.74;
  double booster_increment = 0.293;
  double caps_emphasis = 0.733;
  double exclaim_increment = 0.292;
  int exclaim_max = 3;
  double alpha = 15.0;
};

// UTF-8 `token<TAB>valence` lines, '#' comments. Empty path loads the
// lexicon shipped in the data directory.
SentimentLexicon load_sentiment_lexicon(const std::string& path = "");

// Zero vectors are treated as similarity 0 with a warning.
double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Mean over users of the cosine between per-user n-gram term-frequency
// vectors, in a space fitted on the union of both corpora. n in {1,2}.
double user_distribution_similarity(const Corpus& baseline, const Corpus& variant, int n);

struct TransferResult {
  double baseline_f1 = 0.0;  // mean out-of-fold F1 on the baseline
  double variant_f1 = 0.0;   // full-baseline model applied to the variant
};

// Labels tweets by case-insensitive token match against target_terms,
// removes the matched tokens, then trains a linear hinge classifier on
// unigram features.
TransferResult classification_transfer(const Corpus& baseline, const Corpus& variant,
                                       const std::vector<std::string>& target_terms,
                                       int folds, std::uint64_t seed);

// Lexicon sum with negation, booster, ALL-CAPS and '!' rules, squashed
// to s / sqrt(s^2 + alpha).
double compound_sentiment(const std::string& text, const SentimentLexicon& lexicon);

// Cosine between the per-user mean-compound vectors of both corpora.
double sentiment_similarity(const Corpus& baseline, const Corpus& variant,
                            const SentimentLexicon& lexicon);

UtilityReport evaluate_utility(const std::string& release_id, const Corpus& baseline,
                               const Corpus& variant,
                               const std::vector<std::string>& target_terms,
                               const SentimentLexicon& lexicon, int folds,
                               std::uint64_t seed);

}  // namespace synthtext
