#pragma once

#include <string>

namespace synthtext {

// Deterministic suffix-stripping stemmer (Porter rules). Tokens that
// start with '#', '@' or a digit, or contain characters outside a-z,
// pass through unchanged. The step 2-4 rule table is loaded once from
// data/stemmer_rules.txt.
std::string stem(const std::string& token);

}  // namespace synthtext
