#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>

#include "synthtext/model.hpp"
#include "synthtext/rng.hpp"

namespace synthtext {

struct SamplerConfig {
  double temperature = 1.0;
  int max_len = 140;
  bool greedy = false;  // argmax decoding, temperature ignored
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticRelease {
  Corpus corpus;
  std::string checkpoint_id;
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

// p_i = exp(l_i/tau) / sum_j exp(l_j/tau), computed max-shifted.
Eigen::VectorXd temperature_softmax(const Eigen::VectorXd& logits, double tau);

// One sampled tweet: null-input bootstrap, user clamped at every step,
// drawn symbols fed back until EOS or max_len symbols.
std::string sample_tweet(const SynthesisModel& model, int user,
                         const SamplerConfig& config, Rng& rng);

// One synthetic tweet per original release tweet, per user, with one
// RNG stream per user derived from (seed, user index).
SyntheticRelease synthesize_release(const SynthesisModel& model, const Corpus& release,
                                    double temperature, std::uint64_t seed);

// JSONL corpus plus a provenance JSON sidecar at path + ".meta.json".
void write_release(const SyntheticRelease& release, const std::string& path);

}  // namespace synthtext
