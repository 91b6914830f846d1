#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "synthtext/corpus.hpp"
#include "synthtext/features.hpp"

namespace synthtext {

enum class Classifier { rlsc, svm, nb, knn };

const char* to_string(Classifier c);
Classifier classifier_from_string(const std::string& s);

struct AttackConfig {
  FeatureKind feature_kind = FeatureKind::bigram;
  Classifier classifier = Classifier::svm;
  int test_tweets_per_user = 99;
  double rlsc_ridge = 1.0;
  double svm_regularizer = 1e-4;
  int svm_epochs = 10;
  double nb_smoothing = 1.0;
  std::uint64_t seed = 0;
};

// Per-user top-x identification rates for x = 1..10.
struct RiskCurve {
  std::vector<double> top_x_rates;
  std::map<std::string, int> per_user_rank;  // 1-based rank of the true user
  AttackConfig config;
};

// One one-vs-rest scorer; higher score = more likely this user.
struct UserScorer {
  Classifier kind = Classifier::svm;
  Eigen::VectorXd w;  // linear weight, or the centroid for knn
  double bias = 0.0;
  Eigen::VectorXd nb_log_ratio;  // log theta_user - log theta_rest
  double nb_log_prior = 0.0;     // log prior_user - log prior_rest

  double score(const Eigen::VectorXd& x) const;
};

// Trains k one-vs-rest scorers, one per entry of `users`, on the rows
// of `train` (labels from row_labels). rlsc/svm/knn expect normalized
// input; nb expects raw counts.
std::vector<UserScorer> train_ovr(Classifier kind, const FeatureMatrix& train,
                                  const std::vector<std::string>& users,
                                  const AttackConfig& config);

// Scores each single-user release row under all k scorers and records
// the rank of the true identity (ties broken by ascending user index).
RiskCurve rank_users(const std::vector<UserScorer>& scorers,
                     const std::vector<std::string>& users,
                     const FeatureMatrix& release_collapsed,
                     const AttackConfig& config);

// Full battery for one release variant: features fitted on the attack
// corpus, per-user test sample capped at test_tweets_per_user.
RiskCurve run_attack_cell(const SplitPair& split, const Corpus& release_variant,
                          const AttackConfig& config);

// The 5 feature sets x 4 classifiers grid.
std::vector<AttackConfig> default_attack_configs(std::uint64_t seed);

std::vector<RiskCurve> run_attack_battery(const SplitPair& split,
                                          const Corpus& release_variant,
                                          const std::vector<AttackConfig>& configs);

// Columns: release_id, feature_set, classifier, x, rate.
void append_risk_curves_csv(const std::string& release_id,
                            const std::vector<RiskCurve>& curves, std::ostream& out);

}  // namespace synthtext
