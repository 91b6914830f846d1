#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace synthtext {

// Maximum text length in code points after the ingestion clamp.
inline constexpr std::size_t kMaxTweetChars = 140;

struct TweetRecord {
  std::string user_id;
  std::string text;
};

// A user-labeled tweet collection. Immutable after construction.
class Corpus {
 public:
  Corpus() = default;

  // Validates and derives the user set and per-user counts.
  // Throws std::invalid_argument on empty user ids or over-long texts.
  static Corpus from_records(std::vector<TweetRecord> records);

  const std::vector<TweetRecord>& records() const { return records_; }
  // Distinct user ids in order of first appearance.
  const std::vector<std::string>& users() const { return users_; }
  const std::map<std::string, std::size_t>& per_user_counts() const { return counts_; }
  std::size_t user_count() const { return users_.size(); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Record indices belonging to one user, in record order.
  std::vector<std::size_t> indices_of(const std::string& user_id) const;

  bool same_users(const Corpus& other) const;

 private:
  std::vector<TweetRecord> records_;
  std::vector<std::string> users_;
  std::map<std::string, std::size_t> counts_;
};

struct SplitPair {
  Corpus attack;
  Corpus release;
};

// Character dictionary with reserved null-input, end-of-sequence and
// unknown symbols at fixed indices.
class CharVocab {
 public:
  static constexpr int kNullInput = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kReserved = 3;

  CharVocab() = default;
  explicit CharVocab(std::vector<char32_t> symbols);

  int size() const { return static_cast<int>(symbols_.size()) + kReserved; }
  const std::vector<char32_t>& symbols() const { return symbols_; }

  // Index of a character; kUnk when out of vocabulary.
  int index_of(char32_t c) const;
  // Character at a symbol index (index >= kReserved).
  char32_t symbol_at(int index) const;

  // Symbol indices of the text with one terminal EOS appended.
  std::vector<int> encode(const std::string& text) const;
  // Inverse of encode for in-vocabulary text; EOS and NULL_INPUT are
  // skipped, UNK decodes to U+FFFD.
  std::string decode(std::span<const int> indices) const;

 private:
  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, int> index_;
};

enum class CorpusFormat { jsonl, csv };

struct IngestStats {
  std::size_t truncated = 0;
};

// Reads a labeled corpus from JSONL ({"user_id":..., "text":...} per
// line) or two-column CSV with header. Texts longer than 140 code
// points are clamped; a warning summary goes to stderr.
Corpus ingest(const std::string& path, CorpusFormat format, IngestStats* stats = nullptr);

void write_jsonl(const Corpus& corpus, const std::string& path);

// Seeded per-user partition into attack and release halves. Every user
// keeps at least one tweet on each side; the attack side receives
// round(attack_fraction * n_j) tweets, clamped to [1, n_j - 1].
SplitPair split(const Corpus& corpus, double attack_fraction, std::uint64_t seed);

// Characters occurring at least min_char_freq times, ordered by
// descending frequency then code point.
CharVocab build_vocab(const Corpus& corpus, std::size_t min_char_freq = 2);

// Desk-scale synthetic corpus. Each user draws word tokens from a
// distribution interpolating between one shared distribution
// (divergence 0) and disjoint per-user vocabularies (divergence 1).
// Roughly 20% of tweets carry the planted target token "#targetband".
Corpus make_fixture_corpus(std::size_t n_users, std::size_t tweets_per_user,
                           std::size_t vocab_size, double divergence,
                           std::uint64_t seed);

// The planted classification target of fixture corpora.
inline constexpr const char* kFixtureTargetTerm = "#targetband";

}  // namespace synthtext
