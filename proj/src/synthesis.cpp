#include "synthtext/synthesis.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "synthtext/utf8.hpp"

namespace synthtext {

void SamplerConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
}

Eigen::VectorXd temperature_softmax(const Eigen::VectorXd& logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  Eigen::VectorXd scaled = logits / tau;
  const double m = scaled.maxCoeff();
  Eigen::VectorXd e = (scaled.array() - m).exp().matrix();
  return e / e.sum();
}

namespace {

int draw_symbol(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::string sample_tweet(const SynthesisModel& model, int user,
                         const SamplerConfig& config, Rng& rng) {
  config.validate();
  if (model.config().vocab_size != model.vocab.size()) {
    throw std::runtime_error("sample_tweet: vocab/model size mismatch");
  }
  if (user < 0 || user >= model.config().n_users) {
    throw std::out_of_range("sample_tweet: user index out of range");
  }

  Eigen::VectorXd h = Eigen::VectorXd::Zero(model.config().hidden_size);
  std::vector<int> emitted;
  int input = CharVocab::kNullInput;
  for (int step = 0; step < config.max_len; ++step) {
    Eigen::VectorXd logits = neural::advance(model.params, h, input, user);
    // The null-input symbol is a bootstrap, never an output.
    logits[CharVocab::kNullInput] = -std::numeric_limits<double>::infinity();
    int symbol;
    if (config.greedy) {
      Eigen::Index arg;
      logits.maxCoeff(&arg);
      symbol = static_cast<int>(arg);
    } else {
      symbol = draw_symbol(temperature_softmax(logits, config.temperature), rng);
    }
    if (symbol == CharVocab::kEos) break;
    emitted.push_back(symbol);
    input = symbol;
  }
  return model.vocab.decode(emitted);
}

SyntheticRelease synthesize_release(const SynthesisModel& model, const Corpus& release,
                                    double temperature, std::uint64_t seed) {
  std::string missing;
  for (const auto& u : release.users()) {
    if (model.user_index.find(u) == model.user_index.end()) missing += " " + u;
  }
  if (!missing.empty()) {
    throw std::runtime_error("users absent from model:" + missing);
  }

  SamplerConfig cfg;
  cfg.temperature = temperature;
  cfg.seed = seed;
  cfg.validate();

  std::vector<TweetRecord> records;
  records.reserve(release.size());
  for (const auto& user : release.users()) {
    const int uidx = model.index_of_user(user);
    // Per-user stream so output is stable when the user set changes.
    Rng rng(stage_seed(seed, "user:" + std::to_string(uidx)));
    const std::size_t count = release.per_user_counts().at(user);
    for (std::size_t i = 0; i < count; ++i) {
      records.push_back(TweetRecord{user, sample_tweet(model, uidx, cfg, rng)});
    }
  }

  SyntheticRelease out;
  out.corpus = Corpus::from_records(std::move(records));
  out.temperature = temperature;
  out.seed = seed;
  return out;
}

void write_release(const SyntheticRelease& release, const std::string& path) {
  write_jsonl(release.corpus, path);
  nlohmann::json j;
  j["checkpoint_id"] = release.checkpoint_id;
  j["temperature"] = release.temperature;
  j["seed"] = release.seed;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [u, n] : release.corpus.per_user_counts()) counts[u] = n;
  j["counts"] = counts;
  std::ofstream out(path + ".meta.json");
  if (!out) throw std::runtime_error("cannot write " + path + ".meta.json");
  out << j.dump(2) << "\n";
}

}  // namespace synthtext
