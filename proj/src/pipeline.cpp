#include "synthtext/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "synthtext/baselines.hpp"
#include "synthtext/model.hpp"
#include "synthtext/rng.hpp"
#include "synthtext/synthesis.hpp"

namespace fs = std::filesystem;

namespace synthtext {

void ExperimentConfig::validate() const {
  if (temperatures.empty()) throw std::invalid_argument("temperature list is empty");
  for (double t : temperatures) {
    if (!(t > 0.0)) throw std::invalid_argument("temperatures must be > 0");
  }
  if (!(attack_fraction > 0.0 && attack_fraction < 1.0)) {
    throw std::invalid_argument("attack_fraction must be in (0,1)");
  }
  if (architectures.empty() && !redact_baseline && !translate_baseline) {
    throw std::invalid_argument("no release variant enabled");
  }
  if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (utility_folds < 2) throw std::invalid_argument("utility_folds must be >= 2");
  if (attack.test_tweets_per_user < 1) {
    throw std::invalid_argument("test_tweets_per_user must be >= 1");
  }
  if (!(attack.rlsc_ridge > 0.0)) throw std::invalid_argument("rlsc_ridge must be > 0");
  if (!(attack.nb_smoothing > 0.0)) throw std::invalid_argument("nb_smoothing must be > 0");
  if (output_dir.empty()) throw std::invalid_argument("output_dir is empty");
}

namespace {

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["corpus_path"] = c.corpus_path;
  j["corpus_format"] = c.corpus_format == CorpusFormat::jsonl ? "jsonl" : "csv";
  j["fixture_users"] = c.fixture_users;
  j["fixture_tweets_per_user"] = c.fixture_tweets_per_user;
  j["fixture_vocab"] = c.fixture_vocab;
  j["fixture_divergence"] = c.fixture_divergence;
  j["attack_fraction"] = c.attack_fraction;
  std::vector<std::string> archs;
  for (auto a : c.architectures) archs.push_back(neural::to_string(a));
  j["architectures"] = archs;
  j["temperatures"] = c.temperatures;
  j["hidden_size"] = c.hidden_size;
  j["bptt_window"] = c.bptt_window;
  j["layer_norm"] = c.layer_norm;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["min_char_freq"] = c.min_char_freq;
  j["attack"] = {{"test_tweets_per_user", c.attack.test_tweets_per_user},
                 {"rlsc_ridge", c.attack.rlsc_ridge},
                 {"svm_regularizer", c.attack.svm_regularizer},
                 {"svm_epochs", c.attack.svm_epochs},
                 {"nb_smoothing", c.attack.nb_smoothing}};
  j["target_terms"] = c.target_terms;
  j["lexicon_path"] = c.lexicon_path;
  j["utility_folds"] = c.utility_folds;
  j["redact_baseline"] = c.redact_baseline;
  j["translate_baseline"] = c.translate_baseline;
  j["translation_backend"] = c.translation_backend;
  j["pivot_language"] = c.pivot_language;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.corpus_path = j.value("corpus_path", c.corpus_path);
  const std::string fmt = j.value("corpus_format", std::string("jsonl"));
  if (fmt == "jsonl") {
    c.corpus_format = CorpusFormat::jsonl;
  } else if (fmt == "csv") {
    c.corpus_format = CorpusFormat::csv;
  } else {
    throw std::invalid_argument("unknown corpus_format: " + fmt);
  }
  c.fixture_users = j.value("fixture_users", c.fixture_users);
  c.fixture_tweets_per_user = j.value("fixture_tweets_per_user", c.fixture_tweets_per_user);
  c.fixture_vocab = j.value("fixture_vocab", c.fixture_vocab);
  c.fixture_divergence = j.value("fixture_divergence", c.fixture_divergence);
  c.attack_fraction = j.value("attack_fraction", c.attack_fraction);
  if (j.contains("architectures")) {
    c.architectures.clear();
    for (const auto& a : j["architectures"]) {
      c.architectures.push_back(neural::architecture_from_string(a.get<std::string>()));
    }
  }
  c.temperatures = j.value("temperatures", c.temperatures);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.bptt_window = j.value("bptt_window", c.bptt_window);
  c.layer_norm = j.value("layer_norm", c.layer_norm);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.min_char_freq = j.value("min_char_freq", c.min_char_freq);
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    c.attack.test_tweets_per_user = a.value("test_tweets_per_user", c.attack.test_tweets_per_user);
    c.attack.rlsc_ridge = a.value("rlsc_ridge", c.attack.rlsc_ridge);
    c.attack.svm_regularizer = a.value("svm_regularizer", c.attack.svm_regularizer);
    c.attack.svm_epochs = a.value("svm_epochs", c.attack.svm_epochs);
    c.attack.nb_smoothing = a.value("nb_smoothing", c.attack.nb_smoothing);
  }
  c.target_terms = j.value("target_terms", c.target_terms);
  c.lexicon_path = j.value("lexicon_path", c.lexicon_path);
  c.utility_folds = j.value("utility_folds", c.utility_folds);
  c.redact_baseline = j.value("redact_baseline", c.redact_baseline);
  c.translate_baseline = j.value("translate_baseline", c.translate_baseline);
  c.translation_backend = j.value("translation_backend", c.translation_backend);
  c.pivot_language = j.value("pivot_language", c.pivot_language);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_experiment_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << config_to_json(config).dump(2) << "\n";
}

namespace {

class RunLog {
 public:
  explicit RunLog(const std::string& path) : out_(path, std::ios::app) {}

  void event(const std::string& stage, const std::string& what) {
    nlohmann::json j{{"stage", stage}, {"event", what}};
    if (out_) out_ << j.dump() << "\n" << std::flush;
    std::cerr << "[" << stage << "] " << what << "\n";
  }

 private:
  std::ofstream out_;
};

template <typename F>
auto run_stage(RunLog& log, const std::string& name, F&& fn) {
  log.event(name, "start");
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      log.event(name, "done");
    } else {
      auto r = fn();
      log.event(name, "done");
      return r;
    }
  } catch (const std::exception& e) {
    log.event(name, std::string("error: ") + e.what());
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

std::string temperature_id(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

Corpus load_or_make(const std::string& path, const std::function<Corpus()>& make) {
  if (fs::exists(path)) return ingest(path, CorpusFormat::jsonl);
  Corpus c = make();
  write_jsonl(c, path);
  return c;
}

double headline_top1(const std::vector<RiskCurve>& curves) {
  for (const auto& c : curves) {
    if (c.config.feature_kind == FeatureKind::bigram &&
        c.config.classifier == Classifier::svm) {
      return c.top_x_rates.at(0);
    }
  }
  throw std::runtime_error("headline bigram+svm cell missing from battery");
}

}  // namespace

ProtectionReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::string out = config.output_dir;
  for (const char* sub : {"corpora", "checkpoints", "releases", "reports", "logs"}) {
    fs::create_directories(fs::path(out) / sub);
  }
  RunLog log(out + "/logs/run.jsonl");
  save_experiment_config(config, out + "/reports/config.json");

  Corpus source = run_stage(log, "corpus", [&] {
    return load_or_make(out + "/corpora/source.jsonl", [&] {
      if (!config.corpus_path.empty()) {
        return ingest(config.corpus_path, config.corpus_format);
      }
      return make_fixture_corpus(config.fixture_users, config.fixture_tweets_per_user,
                                 config.fixture_vocab, config.fixture_divergence,
                                 stage_seed(config.seed, "fixture"));
    });
  });

  SplitPair halves = run_stage(log, "split", [&] {
    const std::string attack_path = out + "/corpora/attack.jsonl";
    const std::string release_path = out + "/corpora/release.jsonl";
    if (fs::exists(attack_path) && fs::exists(release_path)) {
      SplitPair s;
      s.attack = ingest(attack_path, CorpusFormat::jsonl);
      s.release = ingest(release_path, CorpusFormat::jsonl);
      return s;
    }
    SplitPair s = split(source, config.attack_fraction, stage_seed(config.seed, "split"));
    write_jsonl(s.attack, attack_path);
    write_jsonl(s.release, release_path);
    return s;
  });

  struct Variant {
    std::string id;
    std::string group;
    double temperature = 0.0;
    Corpus corpus;
  };
  std::vector<Variant> variants;

  for (auto arch : config.architectures) {
    const std::string arch_name = neural::to_string(arch);
    SynthesisModel model = run_stage(log, "train:" + arch_name, [&] {
      const std::string ckpt = out + "/checkpoints/" + arch_name + ".json";
      SynthesisModel m;
      if (fs::exists(ckpt)) {
        m = load_checkpoint(ckpt);
      } else {
        neural::ModelConfig mc;
        mc.arch = arch;
        mc.hidden_size = config.hidden_size;
        mc.bptt_window = config.bptt_window;
        mc.layer_norm = config.layer_norm;
        mc.seed = stage_seed(config.seed, "init:" + arch_name);
        m = make_model(mc, halves.release, config.min_char_freq);
      }
      if (m.epochs_trained < config.epochs) {
        TrainOptions to;
        to.epochs = config.epochs - static_cast<int>(m.epochs_trained);
        to.batch_size = config.batch_size;
        to.seed = stage_seed(config.seed, "train:" + arch_name);
        to.checkpoint_interval = 10;
        to.checkpoint_path = ckpt;
        TrainingLog tl = train(m, halves.release, to);
        tl.write_csv(out + "/logs/train_" + arch_name + ".csv");
        save_checkpoint(m, ckpt);
      }
      return m;
    });

    for (double tau : config.temperatures) {
      const std::string id = arch_name + "-t" + temperature_id(tau);
      Corpus synthetic = run_stage(log, "synthesize:" + id, [&] {
        return load_or_make(out + "/releases/" + id + ".jsonl", [&] {
          SyntheticRelease rel = synthesize_release(model, halves.release, tau,
                                                    stage_seed(config.seed, "synthesize:" + id));
          return rel.corpus;
        });
      });
      variants.push_back(Variant{id, arch_name, tau, std::move(synthetic)});
    }
  }

  if (config.redact_baseline) {
    Corpus redacted = run_stage(log, "redact", [&] {
      return load_or_make(out + "/releases/redacted.jsonl",
                          [&] { return redact(halves.release); });
    });
    variants.push_back(Variant{"redacted", "redacted", 0.0, std::move(redacted)});
  }

  if (config.translate_baseline) {
    Corpus translated = run_stage(log, "translate", [&] {
      return load_or_make(out + "/releases/translated.jsonl", [&] {
        std::unique_ptr<TranslationBackend> backend;
        if (config.translation_backend == "identity") {
          backend = std::make_unique<IdentityBackend>();
        } else if (config.translation_backend == "shuffle") {
          backend = std::make_unique<ShuffleBackend>();
        } else if (config.translation_backend == "http") {
          backend = HttpBackend::from_environment();
        } else {
          throw std::invalid_argument("unknown translation backend: " +
                                      config.translation_backend);
        }
        TranslationCache cache(out + "/logs/translation_cache.jsonl");
        TranslationSummary summary;
        Corpus c = translate_release(halves.release, *backend, config.pivot_language,
                                     &cache, &summary);
        nlohmann::json j{{"backend_calls", summary.backend_calls},
                         {"cache_hits", summary.cache_hits},
                         {"failures", summary.failures}};
        std::ofstream s(out + "/logs/translation_summary.json");
        s << j.dump(2) << "\n";
        return c;
      });
    });
    variants.push_back(Variant{"translated", "translated", 0.0, std::move(translated)});
  }

  auto attack_configs = default_attack_configs(stage_seed(config.seed, "attack"));
  for (auto& ac : attack_configs) {
    ac.test_tweets_per_user = config.attack.test_tweets_per_user;
    ac.rlsc_ridge = config.attack.rlsc_ridge;
    ac.svm_regularizer = config.attack.svm_regularizer;
    ac.svm_epochs = config.attack.svm_epochs;
    ac.nb_smoothing = config.attack.nb_smoothing;
  }
  const SentimentLexicon lexicon = load_sentiment_lexicon(config.lexicon_path);
  const std::uint64_t utility_seed = stage_seed(config.seed, "utility");

  ProtectionReport report;

  run_stage(log, "evaluate:baseline", [&] {
    ReportRow row;
    row.release_id = "baseline";
    row.group = "baseline";
    row.curves = run_attack_battery(halves, halves.release, attack_configs);
    row.headline_top1 = headline_top1(row.curves);
    row.utility.release_id = "baseline";
    // Distribution and sentiment measures compare the release to
    // itself; only the classifier score is an honest estimate (mean
    // out-of-fold F1).
    row.utility.unigram_cosine = 1.0;
    row.utility.bigram_cosine = 1.0;
    row.utility.sentiment_cosine = 1.0;
    try {
      row.utility.classifier_f1 =
          classification_transfer(halves.release, halves.release, config.target_terms,
                                  config.utility_folds, utility_seed)
              .baseline_f1;
    } catch (const std::runtime_error& e) {
      std::cerr << "baseline: " << e.what() << "; classifier utility set to 0\n";
      row.utility.classifier_f1 = 0.0;
    }
    report.rows.push_back(std::move(row));
  });

  for (const auto& v : variants) {
    run_stage(log, "evaluate:" + v.id, [&] {
      ReportRow row;
      row.release_id = v.id;
      row.group = v.group;
      row.temperature = v.temperature;
      row.curves = run_attack_battery(halves, v.corpus, attack_configs);
      row.headline_top1 = headline_top1(row.curves);
      row.utility = evaluate_utility(v.id, halves.release, v.corpus, config.target_terms,
                                     lexicon, config.utility_folds, utility_seed);
      report.rows.push_back(std::move(row));
    });
  }

  run_stage(log, "report", [&] {
    write_report_csv(report, out + "/reports/report.csv");
    write_risk_cells_csv(report, out + "/reports/risk_cells.csv");
    for (auto col : {UtilityColumn::unigram, UtilityColumn::bigram,
                     UtilityColumn::classifier, UtilityColumn::sentiment}) {
      emit_risk_utility_map(report, col,
                            out + "/reports/risk_utility_" + to_string(col) + ".csv");
    }
  });

  return report;
}

const char* to_string(UtilityColumn c) {
  switch (c) {
    case UtilityColumn::unigram: return "unigram";
    case UtilityColumn::bigram: return "bigram";
    case UtilityColumn::classifier: return "classifier";
    case UtilityColumn::sentiment: return "sentiment";
  }
  throw std::logic_error("unknown utility column");
}

void write_report_csv(const ProtectionReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "release_id,group,temperature,risk_top1,unigram_cosine,bigram_cosine,"
         "classifier_f1,sentiment_cosine\n";
  for (const auto& r : report.rows) {
    out << r.release_id << "," << r.group << "," << r.temperature << ","
        << r.headline_top1 << "," << r.utility.unigram_cosine << ","
        << r.utility.bigram_cosine << "," << r.utility.classifier_f1 << ","
        << r.utility.sentiment_cosine << "\n";
  }
}

void write_risk_cells_csv(const ProtectionReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "release_id,feature_set,classifier,x,rate\n";
  for (const auto& r : report.rows) append_risk_curves_csv(r.release_id, r.curves, out);
}

void emit_risk_utility_map(const ProtectionReport& report, UtilityColumn column,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "release_id,group,temperature,risk,utility\n";
  const auto value = [&](const UtilityReport& u) {
    switch (column) {
      case UtilityColumn::unigram: return u.unigram_cosine;
      case UtilityColumn::bigram: return u.bigram_cosine;
      case UtilityColumn::classifier: return u.classifier_f1;
      case UtilityColumn::sentiment: return u.sentiment_cosine;
    }
    throw std::logic_error("unknown utility column");
  };

  // Non-synthetic rows first, then each architecture's temperature
  // sweep in ascending order so each group plots as one curve.
  std::vector<const ReportRow*> ordered;
  for (const auto& r : report.rows) {
    if (r.temperature == 0.0) ordered.push_back(&r);
  }
  std::vector<std::string> groups;
  for (const auto& r : report.rows) {
    if (r.temperature > 0.0 &&
        std::find(groups.begin(), groups.end(), r.group) == groups.end()) {
      groups.push_back(r.group);
    }
  }
  for (const auto& g : groups) {
    std::vector<const ReportRow*> sweep;
    for (const auto& r : report.rows) {
      if (r.temperature > 0.0 && r.group == g) sweep.push_back(&r);
    }
    std::sort(sweep.begin(), sweep.end(),
              [](const ReportRow* a, const ReportRow* b) {
                return a->temperature < b->temperature;
              });
    ordered.insert(ordered.end(), sweep.begin(), sweep.end());
  }

  for (const ReportRow* r : ordered) {
    out << r->release_id << "," << r->group << "," << r->temperature << ","
        << r->headline_top1 << "," << value(r->utility) << "\n";
  }
}

}  // namespace synthtext
