#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "synthtext/corpus.hpp"

namespace synthtext {

enum class FeatureKind { unigram, bigram, char_unigram, char_bigram, stylometric };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

// A fitted feature space: a bijection feature-name -> column, plus
// per-column standardization statistics once normalize() has run.
struct FeatureSpace {
  FeatureKind kind;
  std::vector<std::string> names;                 // column -> name
  std::unordered_map<std::string, int> index;     // name -> column
  std::vector<double> mean, stddev;               // fit stats (optional)
  bool has_fit_stats = false;

  int cols() const { return static_cast<int>(names.size()); }
  // -1 when the feature is not in the space.
  int col_of(const std::string& name) const;
};

using FeatureSpacePtr = std::shared_ptr<const FeatureSpace>;

FeatureSpacePtr make_space(FeatureKind kind, std::vector<std::string> names);

// One sparse feature row; items sorted by column.
struct SparseRow {
  std::vector<std::pair<int, double>> items;

  void add(int col, double value);
  double get(int col) const;
  void sort();
};

struct FeatureMatrix {
  FeatureSpacePtr space;
  std::vector<SparseRow> rows;
  std::vector<std::string> row_labels;  // user id per row

  std::size_t n_rows() const { return rows.size(); }
};

// Lowercased whitespace tokens with edge punctuation stripped; leading
// '#' and '@' are preserved.
std::vector<std::string> tokenize(const std::string& text);

// Same edge handling but case kept (used for word-shape features).
std::vector<std::string> tokenize_preserve_case(const std::string& text);

// Stemmed word n-grams with document frequency >= 2 tweets and
// <= 50% of tweets (both bounds inclusive); columns lexicographic.
FeatureSpacePtr fit_ngram_space(const Corpus& corpus, int n);

// char_unigram, char_bigram and stylometric spaces have fixed columns.
FeatureSpacePtr make_fixed_space(FeatureKind kind);

// Dispatch: fits n-gram kinds on the corpus, fixed kinds ignore it.
FeatureSpacePtr fit_space(FeatureKind kind, const Corpus& corpus);

FeatureMatrix extract(const FeatureSpacePtr& space, std::span<const TweetRecord> tweets);
FeatureMatrix extract(const FeatureSpacePtr& space, const Corpus& corpus);

enum class CollapseMode { mean, centroid };

// One row per user: the arithmetic mean of that user's rows, users in
// first-appearance order.
FeatureMatrix collapse_rows(const FeatureMatrix& matrix, CollapseMode mode);

// Column z-scoring fitted on train (population std; zero-variance
// columns untouched), then each row scaled to unit Euclidean norm.
// Inputs are not modified.
std::pair<FeatureMatrix, FeatureMatrix> normalize(const FeatureMatrix& train,
                                                  const FeatureMatrix& test);

Eigen::MatrixXd to_dense(const FeatureMatrix& m);
Eigen::SparseMatrix<double> to_sparse(const FeatureMatrix& m);

// (row, col, value) triplets.
void write_triplets_csv(const FeatureMatrix& m, const std::string& path);
void write_feature_index_json(const FeatureSpace& space, const std::string& path);

// Shared word lists (loaded once from the data directory).
const std::vector<std::string>& function_words();

// Rule tagger over a 10-tag set; used for the syntactic category-pair
// block of the stylometric features.
enum class PosTag { det, pron, prep, conj, aux, adv, adj, verb, noun, other };
inline constexpr int kNumPosTags = 10;
PosTag pos_tag(const std::string& lower_token);

}  // namespace synthtext
