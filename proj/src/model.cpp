#include "synthtext/model.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "synthtext/rng.hpp"

namespace synthtext {

int SynthesisModel::index_of_user(const std::string& user_id) const {
  auto it = user_index.find(user_id);
  if (it == user_index.end()) {
    throw std::runtime_error("user not known to model: " + user_id);
  }
  return it->second;
}

SynthesisModel make_model(neural::ModelConfig config, const Corpus& corpus,
                          std::size_t min_char_freq) {
  SynthesisModel m;
  m.vocab = build_vocab(corpus, min_char_freq);
  config.vocab_size = m.vocab.size();
  config.n_users = static_cast<int>(corpus.user_count());
  m.params = neural::init_parameters<double>(config);
  m.opt = neural::make_optimizer(m.params);
  m.user_order = corpus.users();
  for (int i = 0; i < static_cast<int>(m.user_order.size()); ++i) {
    m.user_index[m.user_order[i]] = i;
  }
  return m;
}

void TrainingLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,mean_nll,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << "," << e.mean_nll << "," << e.seconds << "\n";
  }
}

namespace {

struct EncodedTweet {
  std::vector<int> inputs;   // null bootstrap + shifted symbols
  std::vector<int> targets;  // symbols with terminal EOS
  int user = 0;
};

std::vector<EncodedTweet> encode_corpus(const SynthesisModel& model, const Corpus& corpus) {
  std::vector<EncodedTweet> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus.records()) {
    EncodedTweet e;
    e.user = model.index_of_user(r.user_id);
    e.targets = model.vocab.encode(r.text);
    e.inputs.reserve(e.targets.size());
    e.inputs.push_back(CharVocab::kNullInput);
    e.inputs.insert(e.inputs.end(), e.targets.begin(), e.targets.end() - 1);
    out.push_back(std::move(e));
  }
  return out;
}

void scale_tensors(neural::Parameters& p, double s) {
  for (auto& ref : neural::tensor_refs(p)) {
    for (Eigen::Index i = 0; i < ref.size(); ++i) ref.data[i] *= s;
  }
}

}  // namespace

TrainingLog train(SynthesisModel& model, const Corpus& corpus, const TrainOptions& opts) {
  if (model.config().vocab_size != model.vocab.size()) {
    throw std::runtime_error("vocab/model size mismatch");
  }
  for (const auto& u : corpus.users()) model.index_of_user(u);

  const auto data = encode_corpus(model, corpus);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stage_seed(opts.seed, "train-batches"));

  TrainingLog log;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t char_sum = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      neural::Parameters grads = neural::zeros_like(model.params);
      std::size_t batch_chars = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& e = data[order[i]];
        auto cache = neural::forward(model.params, e.inputs, e.user);
        auto r = neural::nll_loss(cache.probs, e.targets);
        loss_sum += r.total;
        batch_chars += e.targets.size();
        neural::accumulate(grads, neural::backward(model.params, cache, e.targets));
      }
      char_sum += batch_chars;
      if (batch_chars > 0) {
        scale_tensors(grads, 1.0 / static_cast<double>(batch_chars));
        neural::adam_step(model.params, grads, model.opt);
      }
    }
    ++model.epochs_trained;

    const auto t1 = std::chrono::steady_clock::now();
    EpochStats es;
    es.epoch = epoch;
    es.mean_nll = char_sum ? loss_sum / static_cast<double>(char_sum) : 0.0;
    es.seconds = std::chrono::duration<double>(t1 - t0).count();
    log.epochs.push_back(es);
    if (!opts.quiet) {
      std::cerr << "epoch " << epoch << " nll " << es.mean_nll << "\n";
    }
    if (opts.checkpoint_interval > 0 && !opts.checkpoint_path.empty() &&
        epoch % opts.checkpoint_interval == 0) {
      save_checkpoint(model, opts.checkpoint_path);
    }
  }
  return log;
}

double evaluate_nll(const SynthesisModel& model, const Corpus& corpus) {
  const auto data = encode_corpus(model, corpus);
  double loss = 0.0;
  std::size_t chars = 0;
  for (const auto& e : data) {
    auto cache = neural::forward(model.params, e.inputs, e.user);
    loss += neural::nll_loss(cache.probs, e.targets).total;
    chars += e.targets.size();
  }
  return chars ? loss / static_cast<double>(chars) : 0.0;
}

double text_nll(const SynthesisModel& model, const std::string& text, int user) {
  std::vector<int> targets = model.vocab.encode(text);
  std::vector<int> inputs;
  inputs.push_back(CharVocab::kNullInput);
  inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
  auto cache = neural::forward(model.params, inputs, user);
  return neural::nll_loss(cache.probs, targets).per_char;
}

}  // namespace synthtext
