#pragma once

#include <cstdlib>
#include <string>

namespace synthtext {

// Directory holding the shipped data files (stemmer rules, stop-list,
// tagger lexicon, sentiment lexicon). Overridable via the
// SYNTHTEXT_DATA_DIR environment variable.
inline std::string default_data_dir() {
  if (const char* env = std::getenv("SYNTHTEXT_DATA_DIR")) return env;
#ifdef SYNTHTEXT_DATA_DIR
  return SYNTHTEXT_DATA_DIR;
#else
  return "data";
#endif
}

}  // namespace synthtext
