#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synthtext/baselines.hpp"
#include "synthtext/model.hpp"
#include "synthtext/pipeline.hpp"
#include "synthtext/rng.hpp"
#include "synthtext/synthesis.hpp"

namespace st = synthtext;

namespace {

st::CorpusFormat parse_format(const std::string& s) {
  if (s == "jsonl") return st::CorpusFormat::jsonl;
  if (s == "csv") return st::CorpusFormat::csv;
  throw CLI::ValidationError("--format", "must be jsonl or csv");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Privacy-preserving synthetic tweet corpora: training, synthesis, "
               "re-identification risk and utility evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_path;
  app.add_option("--config", config_path, "Experiment config JSON file")->expected(1);
  app.add_option("--seed", seed, "Master seed")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_path, "Output path or directory");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Normalize a corpus file to JSONL");
  std::string in_path, in_format = "jsonl";
  ingest->add_option("--input", in_path, "Input corpus")->required();
  ingest->add_option("--format", in_format, "jsonl or csv");
  ingest->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "output path required");
    st::IngestStats stats;
    st::Corpus c = st::ingest(in_path, parse_format(in_format), &stats);
    st::write_jsonl(c, out_path);
    std::cout << "tweets=" << c.size() << " users=" << c.user_count()
              << " truncated=" << stats.truncated << "\n";
  });

  // fixture
  auto* fixture = app.add_subcommand("fixture", "Generate a synthetic fixture corpus");
  std::size_t fx_users = 20, fx_tweets = 60, fx_vocab = 120;
  double fx_div = 0.7;
  fixture->add_option("--users", fx_users, "Number of users");
  fixture->add_option("--tweets", fx_tweets, "Tweets per user");
  fixture->add_option("--vocab", fx_vocab, "Word vocabulary size");
  fixture->add_option("--divergence", fx_div, "User divergence in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  fixture->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "output path required");
    st::write_jsonl(st::make_fixture_corpus(fx_users, fx_tweets, fx_vocab, fx_div, seed),
                    out_path);
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a synthesis model");
  std::string tr_corpus, tr_format = "jsonl", tr_arch = "delta_rnn", tr_log;
  int tr_hidden = 256, tr_epochs = 150, tr_batch = 32, tr_window = 0;
  bool tr_no_ln = false;
  train_cmd->add_option("--corpus", tr_corpus, "Training corpus")->required();
  train_cmd->add_option("--format", tr_format, "jsonl or csv");
  train_cmd->add_option("--arch", tr_arch, "elman, delta_rnn or gru");
  train_cmd->add_option("--hidden", tr_hidden, "Hidden state size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tr_epochs, "Training epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr_batch, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--bptt-window", tr_window, "Truncation window (0 = full)");
  train_cmd->add_flag("--no-layer-norm", tr_no_ln, "Disable layer normalization");
  train_cmd->add_option("--log", tr_log, "Per-epoch CSV log path");
  train_cmd->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "checkpoint path required");
    st::Corpus c = st::ingest(tr_corpus, parse_format(tr_format));
    st::neural::ModelConfig mc;
    mc.arch = st::neural::architecture_from_string(tr_arch);
    mc.hidden_size = tr_hidden;
    mc.bptt_window = tr_window;
    mc.layer_norm = !tr_no_ln;
    mc.seed = st::stage_seed(seed, "init");
    st::SynthesisModel model = st::make_model(mc, c);
    st::TrainOptions to;
    to.epochs = tr_epochs;
    to.batch_size = tr_batch;
    to.seed = st::stage_seed(seed, "train");
    to.quiet = false;
    st::TrainingLog log = st::train(model, c, to);
    if (!tr_log.empty()) log.write_csv(tr_log);
    st::save_checkpoint(model, out_path);
    std::cout << "final_nll=" << log.epochs.back().mean_nll << "\n";
  });

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "Sample a synthetic release");
  std::string sy_ckpt, sy_ref;
  double sy_temp = 1.0;
  synth->add_option("--checkpoint", sy_ckpt, "Model checkpoint")->required();
  synth->add_option("--reference", sy_ref, "Corpus defining per-user tweet counts")
      ->required();
  synth->add_option("--temperature", sy_temp, "Sampling temperature");
  synth->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "output path required");
    if (!(sy_temp > 0.0)) throw CLI::ValidationError("--temperature", "must be > 0");
    st::SynthesisModel model = st::load_checkpoint(sy_ckpt);
    st::Corpus ref = st::ingest(sy_ref, st::CorpusFormat::jsonl);
    st::SyntheticRelease rel = st::synthesize_release(model, ref, sy_temp, seed);
    rel.checkpoint_id = sy_ckpt;
    st::write_release(rel, out_path);
  });

  // protect
  auto* protect = app.add_subcommand("protect", "Apply a baseline protection");
  std::string pr_corpus, pr_mode = "redact", pr_backend = "shuffle", pr_pivot = "ar",
              pr_cache;
  protect->add_option("--corpus", pr_corpus, "Release corpus")->required();
  protect->add_option("--mode", pr_mode, "redact or translate");
  protect->add_option("--backend", pr_backend, "identity, shuffle or http");
  protect->add_option("--pivot", pr_pivot, "Pivot language code");
  protect->add_option("--cache", pr_cache, "Translation cache JSONL path");
  protect->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "output path required");
    st::Corpus c = st::ingest(pr_corpus, st::CorpusFormat::jsonl);
    if (pr_mode == "redact") {
      st::write_jsonl(st::redact(c), out_path);
    } else if (pr_mode == "translate") {
      std::unique_ptr<st::TranslationBackend> backend;
      if (pr_backend == "identity") backend = std::make_unique<st::IdentityBackend>();
      else if (pr_backend == "shuffle") backend = std::make_unique<st::ShuffleBackend>();
      else if (pr_backend == "http") backend = st::HttpBackend::from_environment();
      else throw CLI::ValidationError("--backend", "must be identity, shuffle or http");
      std::unique_ptr<st::TranslationCache> cache;
      if (!pr_cache.empty()) cache = std::make_unique<st::TranslationCache>(pr_cache);
      st::TranslationSummary summary;
      st::Corpus t = st::translate_release(c, *backend, pr_pivot, cache.get(), &summary);
      st::write_jsonl(t, out_path);
      std::cout << "backend_calls=" << summary.backend_calls
                << " cache_hits=" << summary.cache_hits
                << " failures=" << summary.failures << "\n";
    } else {
      throw CLI::ValidationError("--mode", "must be redact or translate");
    }
  });

  // attack
  auto* attack = app.add_subcommand("attack", "Run the re-identification battery");
  std::string at_attack, at_release, at_id = "release";
  int at_cap = 99;
  attack->add_option("--attack-corpus", at_attack, "Attacker background corpus")->required();
  attack->add_option("--release", at_release, "Release variant corpus")->required();
  attack->add_option("--release-id", at_id, "Label for the CSV rows");
  attack->add_option("--test-tweets", at_cap, "Max test tweets per user")
      ->check(CLI::PositiveNumber);
  attack->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "output CSV path required");
    st::SplitPair halves;
    halves.attack = st::ingest(at_attack, st::CorpusFormat::jsonl);
    halves.release = st::ingest(at_release, st::CorpusFormat::jsonl);
    if (!halves.attack.same_users(halves.release)) {
      throw std::runtime_error("attack: user sets of the two corpora differ");
    }
    auto configs = st::default_attack_configs(st::stage_seed(seed, "attack"));
    for (auto& c : configs) c.test_tweets_per_user = at_cap;
    auto curves = st::run_attack_battery(halves, halves.release, configs);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "release_id,feature_set,classifier,x,rate\n";
    st::append_risk_curves_csv(at_id, curves, out);
  });

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Utility of a release against a baseline");
  std::string ev_baseline, ev_release, ev_lexicon, ev_id = "release";
  std::vector<std::string> ev_terms = {st::kFixtureTargetTerm};
  int ev_folds = 5;
  eval->add_option("--baseline", ev_baseline, "Baseline corpus")->required();
  eval->add_option("--release", ev_release, "Release variant corpus")->required();
  eval->add_option("--release-id", ev_id, "Label for the CSV row");
  eval->add_option("--term", ev_terms, "Classification target term (repeatable)");
  eval->add_option("--lexicon", ev_lexicon, "Sentiment lexicon path");
  eval->add_option("--folds", ev_folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  eval->callback([&] {
    if (out_path.empty()) throw CLI::ValidationError("--out", "output CSV path required");
    st::Corpus baseline = st::ingest(ev_baseline, st::CorpusFormat::jsonl);
    st::Corpus release = st::ingest(ev_release, st::CorpusFormat::jsonl);
    st::UtilityReport r = st::evaluate_utility(
        ev_id, baseline, release, ev_terms, st::load_sentiment_lexicon(ev_lexicon),
        ev_folds, st::stage_seed(seed, "utility"));
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "release_id,unigram_cosine,bigram_cosine,classifier_f1,sentiment_cosine\n";
    out << r.release_id << "," << r.unigram_cosine << "," << r.bigram_cosine << ","
        << r.classifier_f1 << "," << r.sentiment_cosine << "\n";
  });

  // run / report
  const auto run_experiment_cmd = [&] {
    if (config_path.empty()) throw CLI::ValidationError("--config", "config file required");
    st::ExperimentConfig cfg = st::load_experiment_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out_path.empty()) cfg.output_dir = out_path;
    st::ProtectionReport report = st::run_experiment(cfg);
    std::cout << "rows=" << report.rows.size() << " report="
              << cfg.output_dir + "/reports/report.csv" << "\n";
  };
  app.add_subcommand("run", "Run the full experiment from a config file")
      ->callback(run_experiment_cmd);
  app.add_subcommand("report",
                     "Regenerate report files from a completed output directory")
      ->callback(run_experiment_cmd);

  // Let global --seed/--config/--out appear after the subcommand name.
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
