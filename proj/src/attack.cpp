#include "synthtext/attack.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <ostream>
#include <stdexcept>

#include "synthtext/rng.hpp"

namespace synthtext {

const char* to_string(Classifier c) {
  switch (c) {
    case Classifier::rlsc: return "rlsc";
    case Classifier::svm: return "svm";
    case Classifier::nb: return "nb";
    case Classifier::knn: return "knn";
  }
  throw std::logic_error("unknown classifier");
}

Classifier classifier_from_string(const std::string& s) {
  if (s == "rlsc") return Classifier::rlsc;
  if (s == "svm") return Classifier::svm;
  if (s == "nb") return Classifier::nb;
  if (s == "knn") return Classifier::knn;
  throw std::invalid_argument("unknown classifier: " + s);
}

double UserScorer::score(const Eigen::VectorXd& x) const {
  switch (kind) {
    case Classifier::rlsc:
    case Classifier::svm:
      return w.dot(x) + bias;
    case Classifier::nb:
      return nb_log_ratio.dot(x) + nb_log_prior;
    case Classifier::knn:
      return -(x - w).norm();
  }
  throw std::logic_error("unknown classifier");
}

namespace {

// Conjugate gradients on (X^T X + gamma I) w = X^T y, all products kept
// in factored form so the Gram matrix is never materialized.
Eigen::VectorXd solve_ridge_cg(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               double gamma) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd b = x.transpose() * y;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  const double tol = 1e-12 * std::max(1.0, b.squaredNorm());
  const int max_iter = static_cast<int>(std::min<Eigen::Index>(d, 2000)) + 10;
  for (int it = 0; it < max_iter && rs > tol; ++it) {
    Eigen::VectorXd ap = x.transpose() * (x * p) + gamma * p;
    const double denom = p.dot(ap);
    if (!(denom > 0.0)) break;  // loss of positive definiteness
    const double alpha = rs / denom;
    w += alpha * p;
    r -= alpha * ap;
    const double rs_next = r.squaredNorm();
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  return w;
}

Eigen::VectorXd train_rlsc(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           double gamma) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("rlsc ridge must be > 0");
  }
  Eigen::VectorXd w;
  if (x.cols() <= 256) {
    Eigen::MatrixXd a = x.transpose() * x;
    a.diagonal().array() += gamma;
    w = a.ldlt().solve(x.transpose() * y);
  } else {
    w = solve_ridge_cg(x, y, gamma);
  }
  if (!w.allFinite()) {
    throw std::runtime_error("rlsc system is numerically singular; increase the ridge");
  }
  return w;
}

// Pegasos-style primal subgradient descent on the hinge loss.
UserScorer train_svm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const AttackConfig& config, Rng& rng) {
  UserScorer s;
  s.kind = Classifier::svm;
  s.w = Eigen::VectorXd::Zero(x.cols());
  s.bias = 0.0;
  const double lambda = config.svm_regularizer;
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  long t = 0;
  for (int epoch = 0; epoch < config.svm_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double margin = y[static_cast<Eigen::Index>(i)] *
                            (s.w.dot(x.row(static_cast<Eigen::Index>(i))) + s.bias);
      // The intercept shrinks like the weights; leaving it
      // unregularized lets the early high-learning-rate updates swamp
      // w.x and reduces ranking to a bias comparison.
      s.w *= 1.0 - eta * lambda;
      s.bias *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        s.w += eta * y[static_cast<Eigen::Index>(i)] *
               x.row(static_cast<Eigen::Index>(i)).transpose();
        s.bias += eta * y[static_cast<Eigen::Index>(i)];
      }
    }
  }
  return s;
}

// Binary one-vs-rest multinomial model with Laplace smoothing on raw
// counts; the score keeps only terms that differ between the classes.
UserScorer train_nb(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha) {
  UserScorer s;
  s.kind = Classifier::nb;
  const Eigen::Index d = x.cols();
  Eigen::VectorXd pos = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd neg = Eigen::VectorXd::Zero(d);
  long n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (y[i] > 0) {
      pos += x.row(i).transpose();
      ++n_pos;
    } else {
      neg += x.row(i).transpose();
      ++n_neg;
    }
  }
  const double denom_pos = pos.sum() + alpha * static_cast<double>(d);
  const double denom_neg = neg.sum() + alpha * static_cast<double>(d);
  s.nb_log_ratio = ((pos.array() + alpha) / denom_pos).log().matrix() -
                   ((neg.array() + alpha) / denom_neg).log().matrix();
  const double n = static_cast<double>(n_pos + n_neg);
  s.nb_log_prior = std::log(static_cast<double>(std::max<long>(n_pos, 1)) / n) -
                   std::log(static_cast<double>(std::max<long>(n_neg, 1)) / n);
  return s;
}

}  // namespace

std::vector<UserScorer> train_ovr(Classifier kind, const FeatureMatrix& train,
                                  const std::vector<std::string>& users,
                                  const AttackConfig& config) {
  if (train.n_rows() != train.row_labels.size()) {
    throw std::invalid_argument("train_ovr: unlabeled feature matrix");
  }
  const Eigen::MatrixXd x = to_dense(train);
  std::vector<UserScorer> scorers;
  scorers.reserve(users.size());
  for (std::size_t k = 0; k < users.size(); ++k) {
    Eigen::VectorXd y(x.rows());
    long positives = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const bool pos = train.row_labels[static_cast<std::size_t>(i)] == users[k];
      y[i] = pos ? 1.0 : -1.0;
      positives += pos;
    }
    if (positives == 0) {
      throw std::runtime_error("train_ovr: no training rows for user " + users[k]);
    }
    UserScorer s;
    switch (kind) {
      case Classifier::rlsc:
        s.kind = Classifier::rlsc;
        s.w = train_rlsc(x, y, config.rlsc_ridge);
        break;
      case Classifier::svm: {
        Rng rng(stage_seed(config.seed, "svm:" + users[k]));
        s = train_svm(x, y, config, rng);
        break;
      }
      case Classifier::nb:
        s = train_nb(x, y, config.nb_smoothing);
        break;
      case Classifier::knn: {
        // Nearest class centroid; with one aggregated probe per user
        // this is k-NN over the per-user training centroids.
        s.kind = Classifier::knn;
        s.w = Eigen::VectorXd::Zero(x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          if (y[i] > 0) s.w += x.row(i).transpose();
        }
        s.w /= static_cast<double>(positives);
        break;
      }
    }
    scorers.push_back(std::move(s));
  }
  return scorers;
}

RiskCurve rank_users(const std::vector<UserScorer>& scorers,
                     const std::vector<std::string>& users,
                     const FeatureMatrix& release_collapsed,
                     const AttackConfig& config) {
  if (scorers.size() != users.size()) {
    throw std::invalid_argument("rank_users: scorer/user count mismatch");
  }
  std::unordered_map<std::string, std::size_t> scorer_of;
  for (std::size_t i = 0; i < users.size(); ++i) scorer_of[users[i]] = i;

  const Eigen::MatrixXd probes = to_dense(release_collapsed);
  RiskCurve curve;
  curve.config = config;
  for (Eigen::Index r = 0; r < probes.rows(); ++r) {
    const std::string& truth = release_collapsed.row_labels[static_cast<std::size_t>(r)];
    auto it = scorer_of.find(truth);
    if (it == scorer_of.end()) {
      throw std::runtime_error("rank_users: release user unseen in training: " + truth);
    }
    const Eigen::VectorXd x = probes.row(r).transpose();
    std::vector<double> scores(scorers.size());
    for (std::size_t k = 0; k < scorers.size(); ++k) scores[k] = scorers[k].score(x);
    // Rank of the true user under descending score; equal scores go to
    // the lower user index, so ties never flatter the attacker.
    const double own = scores[it->second];
    int rank = 1;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (k == it->second) continue;
      if (scores[k] > own || (scores[k] == own && k < it->second)) ++rank;
    }
    curve.per_user_rank[truth] = rank;
  }

  const double n = static_cast<double>(curve.per_user_rank.size());
  curve.top_x_rates.assign(10, 0.0);
  for (const auto& [user, rank] : curve.per_user_rank) {
    for (int x = rank; x <= 10; ++x) curve.top_x_rates[static_cast<std::size_t>(x - 1)] += 1.0;
  }
  for (double& r : curve.top_x_rates) r = n > 0 ? r / n : 0.0;
  return curve;
}

RiskCurve run_attack_cell(const SplitPair& split, const Corpus& release_variant,
                          const AttackConfig& config) {
  auto space = fit_space(config.feature_kind, split.attack);
  FeatureMatrix train = extract(space, split.attack);

  // Per-user capped sample of the release side.
  std::vector<TweetRecord> probes;
  for (const auto& user : release_variant.users()) {
    auto idx = release_variant.indices_of(user);
    const std::size_t cap = static_cast<std::size_t>(config.test_tweets_per_user);
    if (idx.size() < cap) {
      std::cerr << "attack: user " << user << " has only " << idx.size()
                << " release tweets (wanted " << cap << ")\n";
    } else if (idx.size() > cap) {
      Rng rng(stage_seed(config.seed, "sample:" + user));
      rng.shuffle(idx);
      idx.resize(cap);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) probes.push_back(release_variant.records()[i]);
  }
  FeatureMatrix test = collapse_rows(extract(space, probes), CollapseMode::mean);

  if (config.classifier != Classifier::nb) {
    auto [train_n, test_n] = normalize(train, test);
    auto scorers = train_ovr(config.classifier, train_n, split.attack.users(), config);
    return rank_users(scorers, split.attack.users(), test_n, config);
  }
  auto scorers = train_ovr(config.classifier, train, split.attack.users(), config);
  return rank_users(scorers, split.attack.users(), test, config);
}

std::vector<AttackConfig> default_attack_configs(std::uint64_t seed) {
  const FeatureKind kinds[] = {FeatureKind::unigram, FeatureKind::bigram,
                               FeatureKind::char_unigram, FeatureKind::char_bigram,
                               FeatureKind::stylometric};
  const Classifier classifiers[] = {Classifier::rlsc, Classifier::svm, Classifier::nb,
                                    Classifier::knn};
  std::vector<AttackConfig> out;
  for (auto kind : kinds) {
    for (auto cls : classifiers) {
      AttackConfig c;
      c.feature_kind = kind;
      c.classifier = cls;
      c.seed = seed;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<RiskCurve> run_attack_battery(const SplitPair& split,
                                          const Corpus& release_variant,
                                          const std::vector<AttackConfig>& configs) {
  std::vector<RiskCurve> out;
  out.reserve(configs.size());
  for (const auto& c : configs) out.push_back(run_attack_cell(split, release_variant, c));
  return out;
}

void append_risk_curves_csv(const std::string& release_id,
                            const std::vector<RiskCurve>& curves, std::ostream& out) {
  for (const auto& curve : curves) {
    for (std::size_t x = 0; x < curve.top_x_rates.size(); ++x) {
      out << release_id << "," << to_string(curve.config.feature_kind) << ","
          << to_string(curve.config.classifier) << "," << (x + 1) << ","
          << curve.top_x_rates[x] << "\n";
    }
  }
}

}  // namespace synthtext
