#include "synthtext/utility.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "synthtext/data_dir.hpp"
#include "synthtext/features.hpp"
#include "synthtext/rng.hpp"

namespace synthtext {

namespace {

const std::set<std::string>& negators() {
  static const std::set<std::string> words = {
      "not",    "no",      "never",  "neither", "nor",     "cannot", "cant",
      "can't",  "dont",    "don't",  "wont",    "won't",   "isnt",   "isn't",
      "wasnt",  "wasn't",  "didnt",  "didn't",  "doesnt",  "doesn't", "aint",
      "ain't",  "hardly",  "without"};
  return words;
}

// +1 intensifies, -1 dampens.
int booster_direction(const std::string& token) {
  static const std::set<std::string> up = {"very",   "really", "extremely", "absolutely",
                                           "incredibly", "so", "totally",   "super"};
  static const std::set<std::string> down = {"slightly", "somewhat", "barely",
                                             "kinda",    "sorta",    "almost",
                                             "marginally"};
  if (up.count(token)) return 1;
  if (down.count(token)) return -1;
  return 0;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_all_caps(const std::string& token) {
  int letters = 0;
  for (unsigned char c : token) {
    if (std::isalpha(c)) {
      if (std::islower(c)) return false;
      ++letters;
    }
  }
  return letters >= 2;
}

double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

SentimentLexicon load_sentiment_lexicon(const std::string& path) {
  const std::string file = path.empty() ? default_data_dir() + "/sentiment_lexicon.txt" : path;
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open sentiment lexicon " + file);
  SentimentLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string token = line.substr(0, tab);
    const double v = std::stod(line.substr(tab + 1));
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite valence for token " + token);
    }
    lex.valence[token] = v;
  }
  return lex;
}

double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  }
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) {
    std::cerr << "cosine_similarity: zero vector, similarity defined as 0\n";
    return 0.0;
  }
  return x.dot(y) / (nx * ny);
}

namespace {

// One term-frequency vector per user, users keyed by id.
std::unordered_map<std::string, Eigen::VectorXd> user_tf(const FeatureSpacePtr& space,
                                                         const Corpus& corpus) {
  std::unordered_map<std::string, Eigen::VectorXd> tf;
  for (const auto& u : corpus.users()) tf[u] = Eigen::VectorXd::Zero(space->cols());
  FeatureMatrix m = extract(space, corpus);
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    Eigen::VectorXd& v = tf[m.row_labels[r]];
    for (const auto& [col, value] : m.rows[r].items) v[col] += value;
  }
  return tf;
}

}  // namespace

double user_distribution_similarity(const Corpus& baseline, const Corpus& variant, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("n-gram order must be 1 or 2");
  if (!baseline.same_users(variant)) {
    throw std::invalid_argument("user_distribution_similarity: user sets differ");
  }
  std::vector<TweetRecord> all = baseline.records();
  all.insert(all.end(), variant.records().begin(), variant.records().end());
  auto space = fit_ngram_space(Corpus::from_records(std::move(all)), n);

  auto tf_base = user_tf(space, baseline);
  auto tf_var = user_tf(space, variant);
  double sum = 0.0;
  for (const auto& u : baseline.users()) sum += cosine_similarity(tf_base[u], tf_var[u]);
  return sum / static_cast<double>(baseline.user_count());
}

namespace {

struct LabeledCorpus {
  Corpus scrubbed;          // matched target tokens removed
  std::vector<int> labels;  // +1 / -1 per tweet
  long positives = 0;
};

// Case-insensitive consecutive-token match; multi-word terms match a
// token run.
LabeledCorpus label_and_scrub(const Corpus& corpus,
                              const std::vector<std::string>& target_terms) {
  std::vector<std::vector<std::string>> terms;
  for (const auto& t : target_terms) {
    terms.push_back(tokenize(lower(t)));
    if (terms.back().empty()) terms.pop_back();
  }
  if (terms.empty()) throw std::invalid_argument("no usable target terms");

  LabeledCorpus out;
  std::vector<TweetRecord> records;
  for (const auto& rec : corpus.records()) {
    std::vector<std::string> tokens = tokenize(rec.text);
    std::vector<bool> drop(tokens.size(), false);
    bool hit = false;
    for (const auto& term : terms) {
      if (term.size() > tokens.size()) continue;
      for (std::size_t i = 0; i + term.size() <= tokens.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < term.size(); ++j) {
          if (tokens[i + j] != term[j]) { match = false; break; }
        }
        if (match) {
          hit = true;
          for (std::size_t j = 0; j < term.size(); ++j) drop[i + j] = true;
        }
      }
    }
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (drop[i]) continue;
      if (!text.empty()) text += ' ';
      text += tokens[i];
    }
    records.push_back(TweetRecord{rec.user_id, std::move(text)});
    out.labels.push_back(hit ? 1 : -1);
    out.positives += hit;
  }
  out.scrubbed = Corpus::from_records(std::move(records));
  return out;
}

Eigen::VectorXd train_hinge(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                            const std::vector<std::size_t>& rows, Rng& rng,
                            double& bias_out) {
  const double lambda = 1e-4;
  const int epochs = 10;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double bias = 0.0;
  std::vector<std::size_t> order = rows;
  long t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double y = labels[i];
      const double margin = y * (w.dot(x.row(static_cast<Eigen::Index>(i))) + bias);
      w *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        w += eta * y * x.row(static_cast<Eigen::Index>(i)).transpose();
        bias += eta * y;
      }
    }
  }
  bias_out = bias;
  return w;
}

double f1_score(long tp, long fp, long fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

TransferResult classification_transfer(const Corpus& baseline, const Corpus& variant,
                                       const std::vector<std::string>& target_terms,
                                       int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("folds must be >= 2");
  LabeledCorpus base = label_and_scrub(baseline, target_terms);
  LabeledCorpus var = label_and_scrub(variant, target_terms);
  if (base.positives == 0) {
    throw std::runtime_error("classification_transfer: no positive labels in baseline");
  }
  if (var.positives == 0) {
    throw std::runtime_error("classification_transfer: no positive labels in variant");
  }

  auto space = fit_ngram_space(base.scrubbed, 1);
  FeatureMatrix base_raw = extract(space, base.scrubbed);
  FeatureMatrix var_raw = extract(space, var.scrubbed);
  auto [base_m, var_m] = normalize(base_raw, var_raw);
  const Eigen::MatrixXd xb = to_dense(base_m);
  const Eigen::MatrixXd xv = to_dense(var_m);

  // Seeded fold assignment.
  std::vector<std::size_t> order(base.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng fold_rng(stage_seed(seed, "transfer-folds"));
  fold_rng.shuffle(order);

  double f1_sum = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? test_rows : train_rows)
          .push_back(order[i]);
    }
    Rng rng(stage_seed(seed, "transfer-fold:" + std::to_string(f)));
    double bias = 0.0;
    Eigen::VectorXd w = train_hinge(xb, base.labels, train_rows, rng, bias);
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i : test_rows) {
      const bool pred = w.dot(xb.row(static_cast<Eigen::Index>(i))) + bias > 0.0;
      const bool truth = base.labels[i] > 0;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    f1_sum += f1_score(tp, fp, fn);
  }

  std::vector<std::size_t> all_rows(base.labels.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
  Rng rng(stage_seed(seed, "transfer-full"));
  double bias = 0.0;
  Eigen::VectorXd w = train_hinge(xb, base.labels, all_rows, rng, bias);
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < var.labels.size(); ++i) {
    const bool pred = w.dot(xv.row(static_cast<Eigen::Index>(i))) + bias > 0.0;
    const bool truth = var.labels[i] > 0;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }

  TransferResult out;
  out.baseline_f1 = f1_sum / static_cast<double>(folds);
  out.variant_f1 = f1_score(tp, fp, fn);
  return out;
}

double compound_sentiment(const std::string& text, const SentimentLexicon& lexicon) {
  const std::vector<std::string> tokens = tokenize_preserve_case(text);
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(lower(t));

  double s = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = lexicon.valence.find(lowered[i]);
    if (it == lexicon.valence.end()) continue;
    double v = it->second;
    // Rules apply in order: negation, booster, ALL-CAPS emphasis.
    for (int back = 1; back <= lexicon.negation_window && back <= static_cast<int>(i);
         ++back) {
      if (negators().count(lowered[i - static_cast<std::size_t>(back)])) {
        v *= lexicon.negation_scale;
        break;
      }
    }
    if (i > 0) {
      const int dir = booster_direction(lowered[i - 1]);
      if (dir != 0) v += sign_of(v) * lexicon.booster_increment * dir;
    }
    if (is_all_caps(tokens[i])) v += sign_of(v) * lexicon.caps_emphasis;
    s += v;
  }

  const long bangs = std::count(text.begin(), text.end(), '!');
  if (bangs > 0 && s != 0.0) {
    s += sign_of(s) * lexicon.exclaim_increment *
         static_cast<double>(std::min<long>(bangs, lexicon.exclaim_max));
  }
  return s / std::sqrt(s * s + lexicon.alpha);
}

double sentiment_similarity(const Corpus& baseline, const Corpus& variant,
                            const SentimentLexicon& lexicon) {
  if (!baseline.same_users(variant)) {
    throw std::invalid_argument("sentiment_similarity: user sets differ");
  }
  const auto per_user_mean = [&](const Corpus& c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(baseline.user_count()));
    for (std::size_t u = 0; u < baseline.users().size(); ++u) {
      const auto idx = c.indices_of(baseline.users()[u]);
      double sum = 0.0;
      for (std::size_t i : idx) sum += compound_sentiment(c.records()[i].text, lexicon);
      v[static_cast<Eigen::Index>(u)] =
          idx.empty() ? 0.0 : sum / static_cast<double>(idx.size());
    }
    return v;
  };
  return cosine_similarity(per_user_mean(baseline), per_user_mean(variant));
}

UtilityReport evaluate_utility(const std::string& release_id, const Corpus& baseline,
                               const Corpus& variant,
                               const std::vector<std::string>& target_terms,
                               const SentimentLexicon& lexicon, int folds,
                               std::uint64_t seed) {
  UtilityReport r;
  r.release_id = release_id;
  r.unigram_cosine = user_distribution_similarity(baseline, variant, 1);
  r.bigram_cosine = user_distribution_similarity(baseline, variant, 2);
  try {
    r.classifier_f1 =
        classification_transfer(baseline, variant, target_terms, folds, seed).variant_f1;
  } catch (const std::runtime_error& e) {
    // A release that never mentions the target terms has no positives
    // to recall; that is zero utility, not a failed run.
    std::cerr << release_id << ": " << e.what() << "; classifier utility set to 0\n";
    r.classifier_f1 = 0.0;
  }
  r.sentiment_cosine = sentiment_similarity(baseline, variant, lexicon);
  return r;
}

}  // namespace synthtext
