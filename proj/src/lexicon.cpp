#include "recipe2iot/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace r2iot {

// ---------------------------------------------------------------------------
// DeviceLexicon
// ---------------------------------------------------------------------------

DeviceLexicon DeviceLexicon::from_words(const std::vector<std::string>& words) {
  DeviceLexicon lex;
  DeviceClass cls;
  cls.name = "dictionary";
  for (const std::string& w : words) {
    if (!w.empty()) cls.terms.push_back(to_lower(w));
  }
  std::sort(cls.terms.begin(), cls.terms.end());
  cls.terms.erase(std::unique(cls.terms.begin(), cls.terms.end()),
                  cls.terms.end());
  if (!cls.terms.empty()) lex.add_class(std::move(cls));
  return lex;
}

void DeviceLexicon::add_class(DeviceClass cls) {
  if (cls.name.empty()) throw Error("device class with empty name");
  if (by_name_.count(cls.name)) {
    throw Error("device class '" + cls.name + "' declared twice");
  }
  std::vector<std::string> terms;
  std::set<std::string> seen;
  for (std::string& term : cls.terms) {
    term = to_lower(trim(term));
    if (term.empty()) {
      throw Error("empty term in device class '" + cls.name + "'");
    }
    if (!seen.insert(term).second) continue;  // duplicate within class
    auto it = term_to_class_.find(term);
    if (it != term_to_class_.end()) {
      throw Error("term '" + term + "' listed under both '" + it->second +
                  "' and '" + cls.name + "'");
    }
    terms.push_back(term);
  }
  cls.terms = std::move(terms);
  for (const std::string& term : cls.terms) {
    term_to_class_[term] = cls.name;
    for (const std::string& w : split_whitespace(term)) words_.insert(w);
  }
  by_name_.emplace(cls.name, classes_.size());
  classes_.push_back(std::move(cls));
}

void DeviceLexicon::validate() const {
  for (const DeviceClass& cls : classes_) {
    // Walk to the root; a repeat visit means a cycle.
    std::set<std::string> visited;
    std::string cur = cls.name;
    while (true) {
      if (!visited.insert(cur).second) {
        throw Error("cycle in device class hierarchy at '" + cur + "'");
      }
      auto it = by_name_.find(cur);
      if (it == by_name_.end()) {
        throw Error("unknown parent class '" + cur + "'");
      }
      const std::string& parent = classes_[it->second].parent;
      if (parent.empty()) break;
      cur = parent;
    }
  }
  // Term disjointness across top-level classes follows from per-term unique
  // ownership enforced in add_class.
}

bool DeviceLexicon::contains_word(std::string_view word) const {
  return words_.count(std::string(word)) > 0;
}

const std::string* DeviceLexicon::class_of_term(std::string_view term) const {
  auto it = term_to_class_.find(std::string(term));
  return it == term_to_class_.end() ? nullptr : &it->second;
}

std::string DeviceLexicon::top_level(const std::string& cls) const {
  std::string cur = cls;
  std::set<std::string> visited;
  while (true) {
    auto it = by_name_.find(cur);
    if (it == by_name_.end() || !visited.insert(cur).second) return cur;
    const std::string& parent = classes_[it->second].parent;
    if (parent.empty()) return cur;
    cur = parent;
  }
}

std::vector<std::string> DeviceLexicon::all_words() const {
  std::vector<std::string> words(words_.begin(), words_.end());
  std::sort(words.begin(), words.end());
  return words;
}

DeviceLexicon load_lexicon(std::istream& in) {
  DeviceLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cols = split(sv, '\t');
    if (cols.size() != 3) {
      std::ostringstream os;
      os << "lexicon line " << lineno
         << ": expected `class<TAB>parent<TAB>terms`, got " << cols.size()
         << " columns";
      throw Error(os.str());
    }
    DeviceLexicon::DeviceClass cls;
    cls.name = std::string(trim(cols[0]));
    if (cols[1] != "_") cls.parent = std::string(trim(cols[1]));
    for (const std::string& term : split(cols[2], ',')) {
      if (!trim(term).empty()) cls.terms.emplace_back(trim(term));
    }
    try {
      lex.add_class(std::move(cls));
    } catch (const Error& e) {
      std::ostringstream os;
      os << "lexicon line " << lineno << ": " << e.what();
      throw Error(os.str());
    }
  }
  lex.validate();
  return lex;
}

DeviceLexicon load_lexicon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon file: " + path);
  return load_lexicon(in);
}

void emit_lexicon(std::ostream& out, const DeviceLexicon& lexicon) {
  for (const auto& cls : lexicon.classes()) {
    out << cls.name << '\t' << (cls.parent.empty() ? "_" : cls.parent) << '\t'
        << join(cls.terms, ",") << "\n";
  }
}

// ---------------------------------------------------------------------------
// Device matching
// ---------------------------------------------------------------------------

std::vector<DeviceMatch> match_devices(const Sentence& sentence,
                                       const DeviceLexicon& lexicon) {
  // Terms are matched as token sequences so that multi-word and hyphenated
  // entries line up with the tokenizer's output.
  std::unordered_map<std::string, const std::string*> by_token_key;
  std::size_t max_len = 0;
  for (const auto& cls : lexicon.classes()) {
    for (const std::string& term : cls.terms) {
      std::vector<Token> term_tokens = tokenize(term);
      if (term_tokens.empty()) continue;
      std::string key;
      for (const Token& t : term_tokens) {
        if (!key.empty()) key += ' ';
        key += t.text;
      }
      max_len = std::max(max_len, term_tokens.size());
      by_token_key.emplace(std::move(key), &cls.name);
    }
  }

  std::vector<DeviceMatch> matches;
  const auto& tokens = sentence.tokens;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    std::size_t longest = std::min(max_len, tokens.size() - i);
    for (std::size_t len = longest; len >= 1 && !matched; --len) {
      std::string key;
      for (std::size_t j = i; j < i + len; ++j) {
        if (!key.empty()) key += ' ';
        key += to_lower(tokens[j].text);
      }
      auto it = by_token_key.find(key);
      if (it != by_token_key.end()) {
        matches.push_back({i, i + len, *it->second});
        i += len;
        matched = true;
      }
    }
    if (!matched) ++i;
  }
  return matches;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

EmbeddingTable load_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    auto parts = split_whitespace(line);
    if (parts.empty()) continue;
    if (first) {
      first = false;
      // word2vec-style `count dim` header
      if (parts.size() == 2) {
        char* end1 = nullptr;
        char* end2 = nullptr;
        std::strtol(parts[0].c_str(), &end1, 10);
        std::strtol(parts[1].c_str(), &end2, 10);
        if (*end1 == '\0' && *end2 == '\0') continue;
      }
    }
    std::vector<double> vec;
    vec.reserve(parts.size() - 1);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      char* end = nullptr;
      double v = std::strtod(parts[i].c_str(), &end);
      if (end == parts[i].c_str() || *end != '\0') {
        std::ostringstream os;
        os << "embedding line " << lineno << ": bad number '" << parts[i]
           << "'";
        throw Error(os.str());
      }
      vec.push_back(v);
    }
    if (vec.empty()) {
      std::ostringstream os;
      os << "embedding line " << lineno << ": no vector components";
      throw Error(os.str());
    }
    if (table.dimension == 0) {
      table.dimension = vec.size();
    } else if (vec.size() != table.dimension) {
      std::ostringstream os;
      os << "embedding line " << lineno << ": dimension " << vec.size()
         << " != " << table.dimension;
      throw Error(os.str());
    }
    if (!table.vectors.emplace(parts[0], std::move(vec)).second) {
      std::ostringstream os;
      os << "embedding line " << lineno << ": duplicate word '" << parts[0]
         << "'";
      throw Error(os.str());
    }
  }
  return table;
}

EmbeddingTable load_embeddings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file: " + path);
  return load_embeddings(in);
}

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<std::pair<std::string, double>> expand_with_embeddings(
    const EmbeddingTable& table, const std::string& seed_term, std::size_t k) {
  if (k < 1) throw Error("expansion requires k >= 1");
  auto it = table.vectors.find(seed_term);
  if (it == table.vectors.end()) {
    throw Error("seed term '" + seed_term + "' not in embedding table");
  }
  const std::vector<double>& seed = it->second;
  double seed_norm = norm(seed);
  if (seed_norm == 0.0) {
    throw Error("seed term '" + seed_term + "' has a zero vector");
  }

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(table.vectors.size());
  for (const auto& [word, vec] : table.vectors) {
    if (word == seed_term) continue;
    double n = norm(vec);
    if (n == 0.0) continue;  // cosine undefined
    double dot = 0.0;
    for (std::size_t d = 0; d < vec.size(); ++d) dot += vec[d] * seed[d];
    scored.emplace_back(word, dot / (n * seed_norm));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

}  // namespace r2iot
