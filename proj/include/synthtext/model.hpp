#pragma once

#include <map>
#include <string>
#include <vector>

#include "synthtext/corpus.hpp"
#include "synthtext/neural.hpp"

namespace synthtext {

// A trained (or trainable) synthesis model: architecture config,
// parameters, optimizer state, plus the user index map and vocabulary
// it was built against.
struct SynthesisModel {
  neural::Parameters params;
  neural::OptimizerState opt;
  std::vector<std::string> user_order;         // user index -> id
  std::map<std::string, int> user_index;       // id -> user index
  CharVocab vocab;
  long epochs_trained = 0;

  const neural::ModelConfig& config() const { return params.config; }
  int index_of_user(const std::string& user_id) const;
};

// Fresh model for a corpus: vocabulary from build_vocab, user map in
// corpus order, Glorot-initialized parameters.
SynthesisModel make_model(neural::ModelConfig config, const Corpus& corpus,
                          std::size_t min_char_freq = 2);

struct EpochStats {
  int epoch = 0;
  double mean_nll = 0.0;  // per character
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  void write_csv(const std::string& path) const;
};

struct TrainOptions {
  int epochs = 150;
  int batch_size = 32;
  std::uint64_t seed = 0;              // batch shuffling seed
  int checkpoint_interval = 0;         // epochs between checkpoints; 0 = off
  std::string checkpoint_path;         // written when interval > 0
  bool quiet = true;
};

// Seeded mini-batch ADAM training on the encoded corpus; gradients are
// scaled by the batch's character count. Returns the per-epoch log.
TrainingLog train(SynthesisModel& model, const Corpus& corpus, const TrainOptions& opts);

// Mean per-character NLL of the corpus under the model without
// updating parameters.
double evaluate_nll(const SynthesisModel& model, const Corpus& corpus);

// Per-character NLL of a single text under an arbitrary user index.
double text_nll(const SynthesisModel& model, const std::string& text, int user);

// Versioned JSON checkpoint holding config, parameters, optimizer
// state, user map and vocabulary.
void save_checkpoint(const SynthesisModel& model, const std::string& path);
SynthesisModel load_checkpoint(const std::string& path);

}  // namespace synthtext
