#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthtext/corpus.hpp"

namespace synthtext {

// Deletes every maximal run `[#@][A-Za-z0-9_]+`, collapses whitespace
// runs to one space and trims the ends.
std::string redact_text(const std::string& text);
Corpus redact(const Corpus& corpus);

class TranslationBackend {
 public:
  virtual ~TranslationBackend() = default;
  virtual std::string id() const = 0;
  // Output batch has exactly one entry per input; an empty string marks
  // a per-text failure.
  virtual std::vector<std::string> translate(const std::vector<std::string>& texts,
                                             const std::string& source,
                                             const std::string& target) = 0;
};

// Returns every text unchanged.
class IdentityBackend : public TranslationBackend {
 public:
  std::string id() const override { return "identity"; }
  std::vector<std::string> translate(const std::vector<std::string>& texts,
                                     const std::string&, const std::string&) override {
    return texts;
  }
};

// Deterministic stand-in for a real service: rotates letters by an
// offset derived from the language pair, so a round trip produces a
// reproducible, genuinely altered text.
class ShuffleBackend : public TranslationBackend {
 public:
  std::string id() const override { return "shuffle"; }
  std::vector<std::string> translate(const std::vector<std::string>& texts,
                                     const std::string& source,
                                     const std::string& target) override;

  static int shift_for(const std::string& source, const std::string& target);
};

// POSTs {"q": [...], "source": ..., "target": ...} to the endpoint in
// SYNTHTEXT_TRANSLATE_ENDPOINT with the bearer token from
// SYNTHTEXT_TRANSLATE_API_KEY; expects {"translations": [...]}.
class HttpBackend : public TranslationBackend {
 public:
  HttpBackend(std::string endpoint, std::string api_key, int max_retries = 3,
              int min_request_interval_ms = 0);
  // Reads endpoint and key from the environment.
  static std::unique_ptr<HttpBackend> from_environment();

  std::string id() const override { return "http:" + endpoint_; }
  std::vector<std::string> translate(const std::vector<std::string>& texts,
                                     const std::string& source,
                                     const std::string& target) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  int max_retries_;
  int min_request_interval_ms_;
  std::int64_t last_request_ms_ = 0;
};

// Append-only JSONL store keyed by (backend, source, target, text).
class TranslationCache {
 public:
  explicit TranslationCache(std::string path);

  std::optional<std::string> get(const std::string& backend, const std::string& source,
                                 const std::string& target, const std::string& text) const;
  void put(const std::string& backend, const std::string& source,
           const std::string& target, const std::string& text,
           const std::string& translation);
  std::size_t size() const { return entries_.size(); }

 private:
  std::string path_;
  std::map<std::string, std::string> entries_;
};

struct TranslationSummary {
  std::size_t backend_calls = 0;  // number of batch requests issued
  std::size_t cache_hits = 0;
  std::size_t failures = 0;  // texts that fell back to the redacted form
};

// Round trip source->pivot->source over the redacted corpus (redaction
// is applied here regardless of the input), batched and cached.
Corpus translate_release(const Corpus& corpus, TranslationBackend& backend,
                         const std::string& pivot, TranslationCache* cache,
                         TranslationSummary* summary = nullptr,
                         std::size_t batch_size = 16);

}  // namespace synthtext
