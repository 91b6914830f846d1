#include "synthtext/stemmer.hpp"

#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "synthtext/data_dir.hpp"

namespace synthtext {
namespace {

struct Rule {
  int min_measure;       // apply only if measure(stem) > min_measure
  std::string suffix;
  std::string replacement;  // empty = delete
  bool require_st = false;  // stem must end in 's' or 't'
};

struct RuleTable {
  std::vector<Rule> step2, step3, step4;
};

RuleTable load_rules() {
  const std::string path = default_data_dir() + "/stemmer_rules.txt";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stemmer rule table: " + path);
  RuleTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int step;
    Rule r;
    std::string repl, cond;
    ss >> step >> r.min_measure >> r.suffix >> repl;
    if (ss >> cond) r.require_st = (cond == "st");
    r.replacement = (repl == "-") ? "" : repl;
    if (step == 2) t.step2.push_back(r);
    else if (step == 3) t.step3.push_back(r);
    else if (step == 4) t.step4.push_back(r);
  }
  return t;
}

const RuleTable& rules() {
  static const RuleTable table = load_rules();
  return table;
}

bool is_consonant(const std::string& w, std::size_t i) {
  char c = w[i];
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !is_consonant(w, i - 1);
    default:
      return true;
  }
}

// Number of vowel-consonant sequences in w[0, len).
int measure(const std::string& w, std::size_t len) {
  int m = 0;
  bool in_vowel = false;
  for (std::size_t i = 0; i < len; ++i) {
    if (!is_consonant(w, i)) {
      in_vowel = true;
    } else if (in_vowel) {
      ++m;
      in_vowel = false;
    }
  }
  return m;
}

bool contains_vowel(const std::string& w, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) {
    if (!is_consonant(w, i)) return true;
  }
  return false;
}

bool ends_double_consonant(const std::string& w) {
  std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// consonant-vowel-consonant ending where the final consonant is not
// w, x or y; evaluated on w[0, len).
bool ends_cvc(const std::string& w, std::size_t len) {
  if (len < 3) return false;
  if (!is_consonant(w, len - 3) || is_consonant(w, len - 2) || !is_consonant(w, len - 1)) {
    return false;
  }
  char c = w[len - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, const std::string& s) {
  return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
}

// Applies the longest matching rule of a step; at most one rule fires.
void apply_table(std::string& w, const std::vector<Rule>& table) {
  const Rule* best = nullptr;
  for (const auto& r : table) {
    if (ends_with(w, r.suffix) && (!best || r.suffix.size() > best->suffix.size())) {
      best = &r;
    }
  }
  if (!best) return;
  const std::size_t stem_len = w.size() - best->suffix.size();
  if (measure(w, stem_len) <= best->min_measure) return;
  if (best->require_st) {
    if (stem_len == 0) return;
    char c = w[stem_len - 1];
    if (c != 's' && c != 't') return;
  }
  w = w.substr(0, stem_len) + best->replacement;
}

void step1a(std::string& w) {
  if (ends_with(w, "sses")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // keep
  } else if (ends_with(w, "s")) {
    w.pop_back();
  }
}

void step1b(std::string& w) {
  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.pop_back();
    return;
  }
  bool stripped = false;
  if (ends_with(w, "ed") && contains_vowel(w, w.size() - 2)) {
    w.erase(w.size() - 2);
    stripped = true;
  } else if (ends_with(w, "ing") && contains_vowel(w, w.size() - 3)) {
    w.erase(w.size() - 3);
    stripped = true;
  }
  if (!stripped) return;
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (ends_double_consonant(w) && w.back() != 'l' && w.back() != 's' &&
             w.back() != 'z') {
    w.pop_back();
  } else if (measure(w, w.size()) == 1 && ends_cvc(w, w.size())) {
    w.push_back('e');
  }
}

void step1c(std::string& w) {
  if (ends_with(w, "y") && contains_vowel(w, w.size() - 1)) w.back() = 'i';
}

void step5a(std::string& w) {
  if (!ends_with(w, "e")) return;
  const int m = measure(w, w.size() - 1);
  if (m > 1 || (m == 1 && !ends_cvc(w, w.size() - 1))) w.pop_back();
}

void step5b(std::string& w) {
  if (w.size() >= 2 && w.back() == 'l' && ends_double_consonant(w) &&
      measure(w, w.size()) > 1) {
    w.pop_back();
  }
}

}  // namespace

std::string stem(const std::string& token) {
  if (token.empty()) throw std::invalid_argument("stem: empty token");
  char first = token[0];
  if (first == '#' || first == '@' || std::isdigit(static_cast<unsigned char>(first))) {
    return token;
  }
  for (char c : token) {
    if (c < 'a' || c > 'z') return token;
  }
  if (token.size() <= 2) return token;

  std::string w = token;
  step1a(w);
  step1b(w);
  step1c(w);
  apply_table(w, rules().step2);
  apply_table(w, rules().step3);
  apply_table(w, rules().step4);
  step5a(w);
  step5b(w);
  return w;
}

}  // namespace synthtext
