#include "synthtext/baselines.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "synthtext/rng.hpp"
#include "synthtext/utf8.hpp"

#include <httplib.h>

namespace synthtext {

namespace {

bool is_handle_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

}  // namespace

std::string redact_text(const std::string& text) {
  std::string kept;
  kept.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if ((text[i] == '#' || text[i] == '@') && i + 1 < text.size() &&
        is_handle_char(static_cast<unsigned char>(text[i + 1]))) {
      ++i;
      while (i < text.size() && is_handle_char(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      kept += text[i++];
    }
  }
  std::string out;
  out.reserve(kept.size());
  for (char c : kept) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += c;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

Corpus redact(const Corpus& corpus) {
  std::vector<TweetRecord> records;
  records.reserve(corpus.size());
  for (const auto& r : corpus.records()) {
    records.push_back(TweetRecord{r.user_id, redact_text(r.text)});
  }
  return Corpus::from_records(std::move(records));
}

int ShuffleBackend::shift_for(const std::string& source, const std::string& target) {
  return static_cast<int>(fnv1a64(source + "->" + target) % 25) + 1;
}

std::vector<std::string> ShuffleBackend::translate(const std::vector<std::string>& texts,
                                                   const std::string& source,
                                                   const std::string& target) {
  const int shift = shift_for(source, target);
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::string t = text;
    for (char& c : t) {
      if (c >= 'a' && c <= 'z') {
        c = static_cast<char>('a' + (c - 'a' + shift) % 26);
      } else if (c >= 'A' && c <= 'Z') {
        c = static_cast<char>('A' + (c - 'A' + shift) % 26);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

HttpBackend::HttpBackend(std::string endpoint, std::string api_key, int max_retries,
                         int min_request_interval_ms)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      max_retries_(max_retries),
      min_request_interval_ms_(min_request_interval_ms) {
  if (endpoint_.empty()) throw std::invalid_argument("translation endpoint is empty");
}

std::unique_ptr<HttpBackend> HttpBackend::from_environment() {
  const char* endpoint = std::getenv("SYNTHTEXT_TRANSLATE_ENDPOINT");
  if (!endpoint || !*endpoint) {
    throw std::runtime_error("SYNTHTEXT_TRANSLATE_ENDPOINT is not set");
  }
  const char* key = std::getenv("SYNTHTEXT_TRANSLATE_API_KEY");
  return std::make_unique<HttpBackend>(endpoint, key ? key : "");
}

std::vector<std::string> HttpBackend::translate(const std::vector<std::string>& texts,
                                                const std::string& source,
                                                const std::string& target) {
  // Split "scheme://host[:port]/path" into client base and request path.
  const auto scheme_end = endpoint_.find("://");
  if (scheme_end == std::string::npos) {
    throw std::runtime_error("malformed translation endpoint: " + endpoint_);
  }
  const auto path_start = endpoint_.find('/', scheme_end + 3);
  const std::string base =
      path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

  nlohmann::json body;
  body["q"] = texts;
  body["source"] = source;
  body["target"] = target;
  const std::string payload = body.dump();

  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (min_request_interval_ms_ > 0) {
      const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now().time_since_epoch())
                           .count();
      const auto wait = last_request_ms_ + min_request_interval_ms_ - now;
      if (wait > 0) std::this_thread::sleep_for(std::chrono::milliseconds(wait));
      last_request_ms_ = now + std::max<std::int64_t>(wait, 0);
    }

    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path, headers, payload, "application/json");
    if (res && res->status == 200) {
      auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (!j.is_discarded() && j.contains("translations") &&
          j["translations"].size() == texts.size()) {
        return j["translations"].get<std::vector<std::string>>();
      }
      throw std::runtime_error("translation endpoint returned a malformed response");
    }
    if (attempt < max_retries_) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200 * (attempt + 1)));
    }
  }
  throw std::runtime_error("translation endpoint unreachable: " + endpoint_);
}

namespace {

std::string cache_key(const std::string& backend, const std::string& source,
                      const std::string& target, const std::string& text) {
  std::string k;
  k.reserve(backend.size() + source.size() + target.size() + text.size() + 3);
  k += backend;
  k += '\x1f';
  k += source;
  k += '\x1f';
  k += target;
  k += '\x1f';
  k += text;
  return k;
}

}  // namespace

TranslationCache::TranslationCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (in && std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw std::runtime_error("corrupt translation cache line in " + path_);
    }
    entries_[cache_key(j.at("backend"), j.at("source"), j.at("target"), j.at("text"))] =
        j.at("translation").get<std::string>();
  }
}

std::optional<std::string> TranslationCache::get(const std::string& backend,
                                                 const std::string& source,
                                                 const std::string& target,
                                                 const std::string& text) const {
  auto it = entries_.find(cache_key(backend, source, target, text));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TranslationCache::put(const std::string& backend, const std::string& source,
                           const std::string& target, const std::string& text,
                           const std::string& translation) {
  const std::string key = cache_key(backend, source, target, text);
  if (entries_.count(key)) return;
  entries_[key] = translation;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to translation cache " + path_);
  nlohmann::json j{{"backend", backend},
                   {"source", source},
                   {"target", target},
                   {"text", text},
                   {"translation", translation}};
  out << j.dump() << "\n";
}

namespace {

// One cached pass source->target over distinct texts.
std::vector<std::string> translate_pass(const std::vector<std::string>& texts,
                                        TranslationBackend& backend,
                                        const std::string& source,
                                        const std::string& target,
                                        TranslationCache* cache,
                                        TranslationSummary& summary,
                                        std::size_t batch_size) {
  std::vector<std::string> out(texts.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache) {
      if (auto hit = cache->get(backend.id(), source, target, texts[i])) {
        out[i] = *hit;
        ++summary.cache_hits;
        continue;
      }
    }
    pending.push_back(i);
  }

  for (std::size_t begin = 0; begin < pending.size(); begin += batch_size) {
    const std::size_t end = std::min(pending.size(), begin + batch_size);
    std::vector<std::string> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(texts[pending[i]]);
    ++summary.backend_calls;
    const auto translated = backend.translate(batch, source, target);
    if (translated.size() != batch.size()) {
      throw std::runtime_error("translation backend returned a short batch");
    }
    for (std::size_t i = begin; i < end; ++i) {
      out[pending[i]] = translated[i - begin];
      if (cache) {
        cache->put(backend.id(), source, target, texts[pending[i]], translated[i - begin]);
      }
    }
  }
  return out;
}

}  // namespace

Corpus translate_release(const Corpus& corpus, TranslationBackend& backend,
                         const std::string& pivot, TranslationCache* cache,
                         TranslationSummary* summary, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  TranslationSummary local;
  TranslationSummary& s = summary ? *summary : local;

  const Corpus redacted = redact(corpus);
  std::vector<std::string> texts;
  texts.reserve(redacted.size());
  for (const auto& r : redacted.records()) texts.push_back(r.text);

  const std::string source = "en";
  auto forward = translate_pass(texts, backend, source, pivot, cache, s, batch_size);
  auto back = translate_pass(forward, backend, pivot, source, cache, s, batch_size);

  std::vector<TweetRecord> records;
  records.reserve(redacted.size());
  for (std::size_t i = 0; i < redacted.size(); ++i) {
    std::string text = back[i];
    if (text.empty() && !texts[i].empty()) {
      // Per-text failure: keep the redacted original.
      ++s.failures;
      text = texts[i];
    }
    records.push_back(
        TweetRecord{redacted.records()[i].user_id, utf8_truncate(text, kMaxTweetChars)});
  }
  return Corpus::from_records(std::move(records));
}

}  // namespace synthtext
