#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synthtext/attack.hpp"
#include "synthtext/corpus.hpp"
#include "synthtext/neural.hpp"
#include "synthtext/utility.hpp"

namespace synthtext {

struct ExperimentConfig {
  // Input corpus; when corpus_path is empty a fixture corpus is
  // generated from the fixture_* knobs instead.
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  std::size_t fixture_users = 20;
  std::size_t fixture_tweets_per_user = 60;
  std::size_t fixture_vocab = 120;
  double fixture_divergence = 0.7;

  double attack_fraction = 0.5;

  std::vector<neural::Architecture> architectures = {
      neural::Architecture::elman, neural::Architecture::delta_rnn,
      neural::Architecture::gru};
  std::vector<double> temperatures = {0.25, 0.5, 1.0, 1.5, 1.75};
  int hidden_size = 256;
  int bptt_window = 0;  // 0 = full backpropagation through time
  bool layer_norm = true;
  int epochs = 150;
  int batch_size = 32;
  std::size_t min_char_freq = 2;

  AttackConfig attack;  // per-cell overrides; kind/classifier enumerated

  std::vector<std::string> target_terms = {kFixtureTargetTerm};
  std::string lexicon_path;
  int utility_folds = 5;

  bool redact_baseline = true;
  bool translate_baseline = true;
  std::string translation_backend = "shuffle";  // identity | shuffle | http
  std::string pivot_language = "ar";

  std::string output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& config, const std::string& path);

struct ReportRow {
  std::string release_id;
  std::string group;         // "baseline", "redacted", "translated" or arch
  double temperature = 0.0;  // 0 for non-synthetic rows
  double headline_top1 = 0.0;
  std::vector<RiskCurve> curves;
  UtilityReport utility;
};

struct ProtectionReport {
  std::vector<ReportRow> rows;
};

// Full experiment: split, train per architecture, synthesize per
// temperature, baseline protections, attack battery and utility on
// every variant. Intermediate artifacts under output_dir are reused on
// rerun, so a completed directory resumes to an identical report.
ProtectionReport run_experiment(const ExperimentConfig& config);

enum class UtilityColumn { unigram, bigram, classifier, sentiment };
const char* to_string(UtilityColumn c);

// One row per release: id, risk (headline top-1) and the four scores.
void write_report_csv(const ProtectionReport& report, const std::string& path);
// All attack cells: release_id, feature_set, classifier, x, rate.
void write_risk_cells_csv(const ProtectionReport& report, const std::string& path);
// Plot data (release_id, group, temperature, risk, utility), synthetic
// rows grouped by architecture in ascending temperature order.
void emit_risk_utility_map(const ProtectionReport& report, UtilityColumn column,
                           const std::string& path);

}  // namespace synthtext
