#include "synthtext/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "synthtext/data_dir.hpp"
#include "synthtext/stemmer.hpp"
#include "synthtext/utf8.hpp"

namespace synthtext {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::unigram: return "unigram";
    case FeatureKind::bigram: return "bigram";
    case FeatureKind::char_unigram: return "char_unigram";
    case FeatureKind::char_bigram: return "char_bigram";
    case FeatureKind::stylometric: return "stylometric";
  }
  return "?";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "unigram") return FeatureKind::unigram;
  if (s == "bigram") return FeatureKind::bigram;
  if (s == "char_unigram") return FeatureKind::char_unigram;
  if (s == "char_bigram") return FeatureKind::char_bigram;
  if (s == "stylometric") return FeatureKind::stylometric;
  throw std::invalid_argument("unknown feature kind: " + s);
}

int FeatureSpace::col_of(const std::string& name) const {
  auto it = index.find(name);
  return it == index.end() ? -1 : it->second;
}

FeatureSpacePtr make_space(FeatureKind kind, std::vector<std::string> names) {
  auto sp = std::make_shared<FeatureSpace>();
  sp->kind = kind;
  sp->names = std::move(names);
  for (int i = 0; i < sp->cols(); ++i) sp->index.emplace(sp->names[i], i);
  return sp;
}

void SparseRow::add(int col, double value) {
  for (auto& [c, v] : items) {
    if (c == col) {
      v += value;
      return;
    }
  }
  items.emplace_back(col, value);
}

double SparseRow::get(int col) const {
  for (const auto& [c, v] : items) {
    if (c == col) return v;
  }
  return 0.0;
}

void SparseRow::sort() {
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

std::vector<std::string> tokenize_impl(const std::string& text, bool lowercase) {
  std::vector<std::string> tokens;
  std::istringstream ss(text);
  std::string raw;
  while (ss >> raw) {
    std::size_t begin = 0, end = raw.size();
    while (begin < end && !is_word_char(static_cast<unsigned char>(raw[begin])) &&
           raw[begin] != '#' && raw[begin] != '@') {
      ++begin;
    }
    // A leading '#'/'@' survives the edge strip.
    const bool marker = begin < end && (raw[begin] == '#' || raw[begin] == '@');
    const std::size_t lo = marker ? begin + 1 : begin;
    while (end > lo && !is_word_char(static_cast<unsigned char>(raw[end - 1]))) {
      --end;
    }
    if (end <= begin) continue;
    std::string tok = raw.substr(begin, end - begin);
    if (marker && tok.size() == 1) continue;  // bare '#' or '@'
    if (lowercase) {
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

const std::unordered_map<std::string, PosTag>& tagger_lexicon() {
  static const auto* lex = [] {
    auto* m = new std::unordered_map<std::string, PosTag>();
    std::ifstream in(default_data_dir() + "/tagger_lexicon.txt");
    if (!in) throw std::runtime_error("cannot open tagger lexicon");
    std::string line;
    std::map<std::string, PosTag> tags{
        {"DET", PosTag::det},   {"PRON", PosTag::pron}, {"PREP", PosTag::prep},
        {"CONJ", PosTag::conj}, {"AUX", PosTag::aux},   {"ADV", PosTag::adv},
        {"ADJ", PosTag::adj},   {"VERB", PosTag::verb}, {"NOUN", PosTag::noun},
        {"OTHER", PosTag::other}};
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string word, tag;
      ss >> word >> tag;
      (*m)[word] = tags.at(tag);
    }
    return m;
  }();
  return *lex;
}

bool token_ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::strlen(suffix);
  return s.size() > n && s.compare(s.size() - n, n, suffix) == 0;
}

const char* tag_name(int t) {
  static const char* names[kNumPosTags] = {"DET",  "PRON", "PREP", "CONJ", "AUX",
                                           "ADV",  "ADJ",  "VERB", "NOUN", "OTHER"};
  return names[t];
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  return tokenize_impl(text, /*lowercase=*/true);
}

std::vector<std::string> tokenize_preserve_case(const std::string& text) {
  return tokenize_impl(text, /*lowercase=*/false);
}

PosTag pos_tag(const std::string& tok) {
  if (tok.empty()) return PosTag::other;
  char first = tok[0];
  if (first == '#' || first == '@' || std::isdigit(static_cast<unsigned char>(first))) {
    return PosTag::other;
  }
  for (char c : tok) {
    if (!std::isalpha(static_cast<unsigned char>(c)) && c != '\'') return PosTag::other;
  }
  auto it = tagger_lexicon().find(tok);
  if (it != tagger_lexicon().end()) return it->second;
  if (token_ends_with(tok, "ly")) return PosTag::adv;
  if (token_ends_with(tok, "ing") || token_ends_with(tok, "ed")) return PosTag::verb;
  if (token_ends_with(tok, "ous") || token_ends_with(tok, "ful") ||
      token_ends_with(tok, "ive") || token_ends_with(tok, "able") ||
      token_ends_with(tok, "al")) {
    return PosTag::adj;
  }
  return PosTag::noun;
}

const std::vector<std::string>& function_words() {
  static const auto* words = [] {
    auto* v = new std::vector<std::string>();
    std::ifstream in(default_data_dir() + "/stopwords.txt");
    if (!in) throw std::runtime_error("cannot open stop-list");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      v->push_back(line);
    }
    return v;
  }();
  return *words;
}

namespace {

std::vector<std::string> tweet_ngrams(const std::string& text, int n) {
  auto tokens = tokenize(text);
  std::vector<std::string> stems;
  stems.reserve(tokens.size());
  for (const auto& t : tokens) stems.push_back(stem(t));
  std::vector<std::string> grams;
  if (n == 1) {
    grams = std::move(stems);
  } else {
    for (std::size_t i = 0; i + 1 < stems.size(); ++i) {
      grams.push_back(stems[i] + " " + stems[i + 1]);
    }
  }
  return grams;
}

}  // namespace

FeatureSpacePtr fit_ngram_space(const Corpus& corpus, int n) {
  if (corpus.empty()) throw std::invalid_argument("fit_ngram_space: empty corpus");
  if (n != 1 && n != 2) throw std::invalid_argument("fit_ngram_space: n must be 1 or 2");

  std::map<std::string, std::size_t> df;
  for (const auto& r : corpus.records()) {
    auto grams = tweet_ngrams(r.text, n);
    std::set<std::string> uniq(grams.begin(), grams.end());
    for (const auto& g : uniq) ++df[g];
  }
  const std::size_t n_tweets = corpus.size();
  std::vector<std::string> names;
  for (const auto& [g, d] : df) {
    if (d >= 2 && 2 * d <= n_tweets) names.push_back(g);
  }
  // std::map iteration is already lexicographic.
  return make_space(n == 1 ? FeatureKind::unigram : FeatureKind::bigram,
                    std::move(names));
}

FeatureSpacePtr make_fixed_space(FeatureKind kind) {
  std::vector<std::string> names;
  switch (kind) {
    case FeatureKind::char_unigram:
      for (char c = 'a'; c <= 'z'; ++c) names.push_back(std::string("char_") + c);
      break;
    case FeatureKind::char_bigram:
      for (char a = 'a'; a <= 'z'; ++a) {
        for (char b = 'a'; b <= 'z'; ++b) {
          names.push_back(std::string("cb_") + a + b);
        }
      }
      break;
    case FeatureKind::stylometric: {
      names = {"word_count", "char_count", "type_token_ratio", "shape_lower",
               "shape_upper", "shape_capitalized", "shape_mixed", "shape_other"};
      for (int l = 1; l <= 20; ++l) names.push_back("wlen_" + std::to_string(l));
      for (char c = 'a'; c <= 'z'; ++c) names.push_back(std::string("char_") + c);
      names.push_back("punct_count");
      names.push_back("digit_count");
      names.push_back("nonascii_count");
      for (const auto& w : function_words()) names.push_back("fw_" + w);
      for (int a = 0; a < kNumPosTags; ++a) {
        for (int b = 0; b < kNumPosTags; ++b) {
          names.push_back(std::string("tagpair_") + tag_name(a) + "_" + tag_name(b));
        }
      }
      break;
    }
    default:
      throw std::invalid_argument("make_fixed_space: n-gram kinds need fitting");
  }
  return make_space(kind, std::move(names));
}

FeatureSpacePtr fit_space(FeatureKind kind, const Corpus& corpus) {
  switch (kind) {
    case FeatureKind::unigram: return fit_ngram_space(corpus, 1);
    case FeatureKind::bigram: return fit_ngram_space(corpus, 2);
    default: return make_fixed_space(kind);
  }
}

namespace {

void extract_char_unigram(const FeatureSpace& space, const std::string& text,
                          SparseRow& row, int base) {
  for (unsigned char c : text) {
    char lc = static_cast<char>(std::tolower(c));
    if (lc >= 'a' && lc <= 'z') row.add(base + (lc - 'a'), 1.0);
  }
  (void)space;
}

void extract_stylometric(const FeatureSpace& space, const std::string& text,
                         SparseRow& row) {
  auto cased = tokenize_preserve_case(text);
  auto lower = tokenize(text);

  row.add(space.col_of("word_count"), static_cast<double>(lower.size()));
  row.add(space.col_of("char_count"), static_cast<double>(utf8_length(text)));
  if (!lower.empty()) {
    std::set<std::string> types(lower.begin(), lower.end());
    row.add(space.col_of("type_token_ratio"),
            static_cast<double>(types.size()) / static_cast<double>(lower.size()));
  }

  for (const auto& tok : cased) {
    bool any_alpha = false, any_lower = false, any_upper = false, any_other = false;
    for (unsigned char c : tok) {
      if (std::isalpha(c)) {
        any_alpha = true;
        if (std::islower(c)) any_lower = true;
        if (std::isupper(c)) any_upper = true;
      } else {
        any_other = true;
      }
    }
    const char* shape;
    if (!any_alpha || any_other) {
      shape = "shape_other";
    } else if (any_lower && !any_upper) {
      shape = "shape_lower";
    } else if (any_upper && !any_lower) {
      shape = "shape_upper";
    } else if (std::isupper(static_cast<unsigned char>(tok[0])) &&
               tok.find_first_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ", 1) == std::string::npos) {
      shape = "shape_capitalized";
    } else {
      shape = "shape_mixed";
    }
    row.add(space.col_of(shape), 1.0);

    const std::size_t len = std::min<std::size_t>(utf8_length(tok), 20);
    if (len >= 1) row.add(space.col_of("wlen_" + std::to_string(len)), 1.0);
  }

  extract_char_unigram(space, text, row, space.col_of("char_a"));

  double punct = 0, digits = 0, nonascii = 0;
  for (char32_t c : utf8_decode(text)) {
    if (c > 127) {
      ++nonascii;
    } else if (std::isdigit(static_cast<int>(c))) {
      ++digits;
    } else if (std::ispunct(static_cast<int>(c))) {
      ++punct;
    }
  }
  if (punct > 0) row.add(space.col_of("punct_count"), punct);
  if (digits > 0) row.add(space.col_of("digit_count"), digits);
  if (nonascii > 0) row.add(space.col_of("nonascii_count"), nonascii);

  for (const auto& tok : lower) {
    int col = space.col_of("fw_" + tok);
    if (col >= 0) row.add(col, 1.0);
  }

  const int tag_base = space.col_of("tagpair_DET_DET");
  for (std::size_t i = 0; i + 1 < lower.size(); ++i) {
    int a = static_cast<int>(pos_tag(lower[i]));
    int b = static_cast<int>(pos_tag(lower[i + 1]));
    row.add(tag_base + a * kNumPosTags + b, 1.0);
  }
}

}  // namespace

FeatureMatrix extract(const FeatureSpacePtr& space, std::span<const TweetRecord> tweets) {
  if (!space) throw std::invalid_argument("extract: unfitted space");
  FeatureMatrix m;
  m.space = space;
  m.rows.reserve(tweets.size());
  for (const auto& tw : tweets) {
    SparseRow row;
    switch (space->kind) {
      case FeatureKind::unigram:
      case FeatureKind::bigram: {
        const int n = space->kind == FeatureKind::unigram ? 1 : 2;
        for (const auto& g : tweet_ngrams(tw.text, n)) {
          int col = space->col_of(g);
          if (col >= 0) row.add(col, 1.0);
        }
        break;
      }
      case FeatureKind::char_unigram:
        extract_char_unigram(*space, tw.text, row, 0);
        break;
      case FeatureKind::char_bigram: {
        // Bigrams over the lowercased letters-only character stream.
        std::string stream;
        for (unsigned char c : tw.text) {
          char lc = static_cast<char>(std::tolower(c));
          if (lc >= 'a' && lc <= 'z') stream.push_back(lc);
        }
        for (std::size_t i = 0; i + 1 < stream.size(); ++i) {
          row.add((stream[i] - 'a') * 26 + (stream[i + 1] - 'a'), 1.0);
        }
        break;
      }
      case FeatureKind::stylometric:
        extract_stylometric(*space, tw.text, row);
        break;
    }
    row.sort();
    m.rows.push_back(std::move(row));
    m.row_labels.push_back(tw.user_id);
  }
  return m;
}

FeatureMatrix extract(const FeatureSpacePtr& space, const Corpus& corpus) {
  return extract(space, std::span<const TweetRecord>(corpus.records()));
}

FeatureMatrix collapse_rows(const FeatureMatrix& matrix, CollapseMode) {
  FeatureMatrix out;
  out.space = matrix.space;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    auto& g = groups[matrix.row_labels[i]];
    if (g.empty()) order.push_back(matrix.row_labels[i]);
    g.push_back(i);
  }
  for (const auto& user : order) {
    const auto& g = groups[user];
    std::map<int, double> acc;
    for (std::size_t i : g) {
      for (const auto& [c, v] : matrix.rows[i].items) acc[c] += v;
    }
    SparseRow row;
    for (const auto& [c, v] : acc) {
      row.items.emplace_back(c, v / static_cast<double>(g.size()));
    }
    out.rows.push_back(std::move(row));
    out.row_labels.push_back(user);
  }
  return out;
}

std::pair<FeatureMatrix, FeatureMatrix> normalize(const FeatureMatrix& train,
                                                  const FeatureMatrix& test) {
  if (train.space != test.space && train.space->names != test.space->names) {
    throw std::invalid_argument("normalize: feature space mismatch");
  }
  const int cols = train.space->cols();
  const double n = static_cast<double>(train.rows.size());
  std::vector<double> mean(cols, 0.0), sq(cols, 0.0);
  for (const auto& row : train.rows) {
    for (const auto& [c, v] : row.items) {
      mean[c] += v;
      sq[c] += v * v;
    }
  }
  std::vector<double> stddev(cols, 0.0);
  for (int c = 0; c < cols; ++c) {
    mean[c] /= n;
    const double var = std::max(0.0, sq[c] / n - mean[c] * mean[c]);
    stddev[c] = std::sqrt(var);
  }

  auto fitted = std::make_shared<FeatureSpace>(*train.space);
  fitted->mean = mean;
  fitted->stddev = stddev;
  fitted->has_fit_stats = true;

  auto transform = [&](const FeatureMatrix& src) {
    FeatureMatrix out;
    out.space = fitted;
    out.row_labels = src.row_labels;
    out.rows.reserve(src.rows.size());
    for (const auto& row : src.rows) {
      Eigen::VectorXd dense = Eigen::VectorXd::Zero(cols);
      for (const auto& [c, v] : row.items) dense[c] = v;
      for (int c = 0; c < cols; ++c) {
        if (stddev[c] > 0.0) dense[c] = (dense[c] - mean[c]) / stddev[c];
      }
      const double norm = dense.norm();
      if (norm > 0.0) dense /= norm;
      SparseRow nr;
      for (int c = 0; c < cols; ++c) {
        if (dense[c] != 0.0) nr.items.emplace_back(c, dense[c]);
      }
      out.rows.push_back(std::move(nr));
    }
    return out;
  };
  return {transform(train), transform(test)};
}

Eigen::MatrixXd to_dense(const FeatureMatrix& m) {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows.size()), m.space->cols());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (const auto& [c, v] : m.rows[i].items) {
      out(static_cast<Eigen::Index>(i), c) = v;
    }
  }
  return out;
}

Eigen::SparseMatrix<double> to_sparse(const FeatureMatrix& m) {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (const auto& [c, v] : m.rows[i].items) {
      trip.emplace_back(static_cast<int>(i), c, v);
    }
  }
  Eigen::SparseMatrix<double> out(static_cast<int>(m.rows.size()), m.space->cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void write_triplets_csv(const FeatureMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "row,col,value\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (const auto& [c, v] : m.rows[i].items) {
      out << i << "," << c << "," << v << "\n";
    }
  }
}

void write_feature_index_json(const FeatureSpace& space, const std::string& path) {
  nlohmann::json j;
  j["kind"] = to_string(space.kind);
  j["names"] = space.names;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace synthtext
