#include "synthtext/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "synthtext/rng.hpp"
#include "synthtext/utf8.hpp"

namespace synthtext {

Corpus Corpus::from_records(std::vector<TweetRecord> records) {
  Corpus c;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.user_id.empty()) {
      throw std::invalid_argument("empty user_id at record " + std::to_string(i));
    }
    if (utf8_length(r.text) > kMaxTweetChars) {
      throw std::invalid_argument("text longer than 140 characters at record " +
                                  std::to_string(i));
    }
    if (c.counts_.find(r.user_id) == c.counts_.end()) {
      c.users_.push_back(r.user_id);
      c.counts_[r.user_id] = 0;
    }
    ++c.counts_[r.user_id];
  }
  c.records_ = std::move(records);
  return c;
}

std::vector<std::size_t> Corpus::indices_of(const std::string& user_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].user_id == user_id) out.push_back(i);
  }
  return out;
}

bool Corpus::same_users(const Corpus& other) const {
  if (users_.size() != other.users_.size()) return false;
  std::vector<std::string> a = users_, b = other.users_;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

CharVocab::CharVocab(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<int>(i) + kReserved).second) {
      throw std::invalid_argument("duplicate symbol in vocabulary");
    }
  }
}

int CharVocab::index_of(char32_t c) const {
  auto it = index_.find(c);
  return it == index_.end() ? kUnk : it->second;
}

char32_t CharVocab::symbol_at(int index) const {
  if (index < kReserved || index >= size()) {
    throw std::out_of_range("symbol index out of range");
  }
  return symbols_[static_cast<std::size_t>(index - kReserved)];
}

std::vector<int> CharVocab::encode(const std::string& text) const {
  std::vector<int> out;
  for (char32_t c : utf8_decode(text)) out.push_back(index_of(c));
  out.push_back(kEos);
  return out;
}

std::string CharVocab::decode(std::span<const int> indices) const {
  std::string out;
  for (int idx : indices) {
    if (idx == kNullInput || idx == kEos) continue;
    if (idx == kUnk) {
      out += utf8_encode(char32_t{0xFFFD});
    } else {
      out += utf8_encode(symbol_at(idx));
    }
  }
  return out;
}

namespace {

// RFC-4180-ish single line split; supports quoted fields with ""
// escapes but not embedded newlines.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

TweetRecord clamp_record(std::string user_id, std::string text, std::size_t line_no,
                         IngestStats& stats) {
  if (user_id.empty()) {
    throw std::runtime_error("empty user_id at line " + std::to_string(line_no));
  }
  if (utf8_length(text) > kMaxTweetChars) {
    text = utf8_truncate(text, kMaxTweetChars);
    ++stats.truncated;
  }
  return TweetRecord{std::move(user_id), std::move(text)};
}

}  // namespace

Corpus ingest(const std::string& path, CorpusFormat format, IngestStats* stats_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  IngestStats stats;
  std::vector<TweetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (format == CorpusFormat::jsonl) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("user_id") ||
          !j.contains("text") || !j["user_id"].is_string() || !j["text"].is_string()) {
        throw std::runtime_error("malformed record at line " + std::to_string(line_no));
      }
      records.push_back(clamp_record(j["user_id"].get<std::string>(),
                                     j["text"].get<std::string>(), line_no, stats));
    } else {
      if (!saw_header) {
        saw_header = true;  // first non-empty line is the header
        continue;
      }
      auto fields = split_csv_line(line);
      if (fields.size() != 2) {
        throw std::runtime_error("malformed record at line " + std::to_string(line_no));
      }
      records.push_back(clamp_record(std::move(fields[0]), std::move(fields[1]),
                                     line_no, stats));
    }
  }
  if (records.empty()) throw std::runtime_error("empty corpus file: " + path);

  if (stats.truncated > 0) {
    std::cerr << "warning: clamped " << stats.truncated
              << " over-long tweet(s) to 140 characters\n";
  }
  if (stats_out) *stats_out = stats;
  return Corpus::from_records(std::move(records));
}

void write_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : corpus.records()) {
    nlohmann::json j;
    j["user_id"] = r.user_id;
    j["text"] = r.text;
    out << j.dump() << "\n";
  }
}

SplitPair split(const Corpus& corpus, double attack_fraction, std::uint64_t seed) {
  if (!(attack_fraction > 0.0 && attack_fraction < 1.0)) {
    throw std::invalid_argument("attack_fraction must be in (0,1)");
  }
  std::vector<std::string> offenders;
  for (const auto& u : corpus.users()) {
    if (corpus.per_user_counts().at(u) < 2) offenders.push_back(u);
  }
  if (!offenders.empty()) {
    std::string msg = "users with fewer than 2 tweets:";
    for (const auto& u : offenders) msg += " " + u;
    throw std::runtime_error(msg);
  }

  Rng rng(seed);
  std::vector<bool> to_attack(corpus.size(), false);
  for (const auto& u : corpus.users()) {
    auto idx = corpus.indices_of(u);
    const std::size_t n = idx.size();
    auto n_attack = static_cast<std::size_t>(
        std::llround(attack_fraction * static_cast<double>(n)));
    n_attack = std::max<std::size_t>(1, std::min(n_attack, n - 1));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < n_attack; ++i) to_attack[idx[i]] = true;
  }

  std::vector<TweetRecord> attack, release;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (to_attack[i] ? attack : release).push_back(corpus.records()[i]);
  }
  return SplitPair{Corpus::from_records(std::move(attack)),
                   Corpus::from_records(std::move(release))};
}

CharVocab build_vocab(const Corpus& corpus, std::size_t min_char_freq) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<char32_t, std::size_t> freq;
  for (const auto& r : corpus.records()) {
    for (char32_t c : utf8_decode(r.text)) ++freq[c];
  }
  std::vector<std::pair<char32_t, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<char32_t> symbols;
  for (const auto& [c, n] : items) {
    if (n >= min_char_freq) symbols.push_back(c);
  }
  return CharVocab(std::move(symbols));
}

namespace {

std::string random_word(Rng& rng) {
  static const char letters[] = "abcdefghijklmnopqrstuvwxyz";
  const std::size_t len = 3 + rng.below(5);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w.push_back(letters[rng.below(26)]);
  return w;
}

}  // namespace

Corpus make_fixture_corpus(std::size_t n_users, std::size_t tweets_per_user,
                           std::size_t vocab_size, double divergence,
                           std::uint64_t seed) {
  if (n_users < 2) throw std::invalid_argument("make_fixture_corpus: n_users must be >= 2");
  if (!(divergence >= 0.0 && divergence <= 1.0)) {
    throw std::invalid_argument("make_fixture_corpus: divergence must be in [0,1]");
  }
  if (vocab_size < 1) throw std::invalid_argument("make_fixture_corpus: empty vocabulary");

  Rng rng(seed);
  std::vector<std::string> shared(vocab_size);
  for (auto& w : shared) w = random_word(rng);

  const std::size_t private_size = std::max<std::size_t>(3, vocab_size / 4);
  std::vector<std::vector<std::string>> private_vocab(n_users);
  for (auto& pv : private_vocab) {
    pv.resize(private_size);
    for (auto& w : pv) w = random_word(rng);
  }

  // Zipf-ish weights shared by every user so divergence=0 gives one
  // common distribution.
  std::vector<double> shared_w(vocab_size), private_w(private_size);
  for (std::size_t i = 0; i < vocab_size; ++i) shared_w[i] = 1.0 / (1.0 + static_cast<double>(i));
  for (std::size_t i = 0; i < private_size; ++i) private_w[i] = 1.0 / (1.0 + static_cast<double>(i));

  std::vector<TweetRecord> records;
  records.reserve(n_users * tweets_per_user);
  for (std::size_t u = 0; u < n_users; ++u) {
    std::string uid = "user" + std::to_string(u);
    for (std::size_t t = 0; t < tweets_per_user; ++t) {
      const std::size_t n_words = 4 + rng.below(8);
      std::string text;
      for (std::size_t w = 0; w < n_words; ++w) {
        const std::string& word = (rng.uniform() < divergence)
                                      ? private_vocab[u][rng.categorical(private_w)]
                                      : shared[rng.categorical(shared_w)];
        if (!text.empty()) text += ' ';
        text += word;
      }
      if (rng.uniform() < 0.2) {
        text += ' ';
        text += kFixtureTargetTerm;
      }
      if (text.size() > kMaxTweetChars) text = text.substr(0, kMaxTweetChars);
      records.push_back(TweetRecord{uid, std::move(text)});
    }
  }
  return Corpus::from_records(std::move(records));
}

}  // namespace synthtext
