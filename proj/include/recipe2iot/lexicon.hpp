// Hierarchical kitchen-device dictionary and embedding-based expansion.
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recipe2iot/corpus.hpp"

namespace r2iot {

class DeviceLexicon {
 public:
  struct DeviceClass {
    std::string name;
    std::string parent;  // empty for a top-level class
    std::vector<std::string> terms;
  };

  DeviceLexicon() = default;

  /// Builds a flat one-class lexicon from bare words. Used to reconstruct
  /// the in-dictionary feature from a saved model snapshot.
  static DeviceLexicon from_words(const std::vector<std::string>& words);

  void add_class(DeviceClass cls);  // validates invariants incrementally
  void validate() const;            // full check: forest + term disjointness

  const std::vector<DeviceClass>& classes() const { return classes_; }
  bool empty() const { return classes_.empty(); }

  /// True iff `word` (lowercase) occurs as a word of any term.
  bool contains_word(std::string_view word) const;

  /// Owning class of an exact term (lowercase), or nullptr.
  const std::string* class_of_term(std::string_view term) const;

  /// Root of the parent chain for a class name; returns the name itself for
  /// unknown classes.
  std::string top_level(const std::string& cls) const;

  /// All distinct dictionary words, sorted.
  std::vector<std::string> all_words() const;

 private:
  std::vector<DeviceClass> classes_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::string, std::string> term_to_class_;
  std::unordered_set<std::string> words_;
};

/// Parses `class<TAB>parent-or-_<TAB>term1,term2,...` lines; '#' comments.
/// Terms are lowercased; duplicates within one class are dropped. Cycles
/// and a term owned by two classes are hard errors.
DeviceLexicon load_lexicon(std::istream& in);
DeviceLexicon load_lexicon_file(const std::string& path);
void emit_lexicon(std::ostream& out, const DeviceLexicon& lexicon);

struct DeviceMatch {
  std::size_t token_begin = 0;  // token indices, end exclusive
  std::size_t token_end = 0;
  std::string device_class;
};

/// Longest-match-first, case-insensitive matching of dictionary terms
/// against the token sequence. Matches never overlap.
std::vector<DeviceMatch> match_devices(const Sentence& sentence,
                                       const DeviceLexicon& lexicon);

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

/// Text vector format: `word v1 v2 ... vD` per line. A leading `N D` header
/// line is accepted and skipped.
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings_file(const std::string& path);

/// Top-k most cosine-similar words to seed_term, seed excluded, ties broken
/// lexicographically. The result is a candidate list for human review; it is
/// never merged into a lexicon automatically.
std::vector<std::pair<std::string, double>> expand_with_embeddings(
    const EmbeddingTable& table, const std::string& seed_term, std::size_t k);

}  // namespace r2iot
