// Sparse per-token feature extraction for the sequence labeler.
//
// Feature keys follow `[<signed offset>|head]:<group>=<value>`; the focus
// token's own group carries no prefix. Examples: `w=oven`, `-1:w=the`,
// `+2:EOS`, `head:pos=NOUN`.
#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "recipe2iot/corpus.hpp"
#include "recipe2iot/lexicon.hpp"

namespace r2iot {

/// Embedded default stopword list (~150 common function words).
const std::unordered_set<std::string>& default_stopwords();

/// One lowercase word per line; '#' comments allowed.
std::unordered_set<std::string> load_stopwords(std::istream& in);
std::unordered_set<std::string> load_stopwords_file(const std::string& path);

struct FeatureConfig {
  int window = 3;        // neighbor radius, in {0,1,2,3}
  bool use_head = true;  // add the focus token's head-token group
  int min_freq = 0;      // drop features seen fewer times during training
  std::unordered_set<std::string> stopwords = default_stopwords();
};

/// Presence features for one token position.
using FeatureVector = std::set<std::string>;

/// Features for token i of the sentence: the focus group, one group per
/// neighbor within cfg.window (BOS/EOS markers past the edges) and, when
/// enabled and present, the head-token group.
FeatureVector token_features(const Sentence& sentence, std::size_t i,
                             const FeatureConfig& cfg,
                             const DeviceLexicon& lexicon);

std::vector<FeatureVector> sentence_features(const Sentence& sentence,
                                             const FeatureConfig& cfg,
                                             const DeviceLexicon& lexicon);

using FeatureIds = std::vector<int>;

struct IndexedSequence {
  std::vector<FeatureIds> items;  // per-token active feature ids, sorted
  std::vector<int> labels;        // per-token label ids
};

struct FeatureDataset {
  std::vector<IndexedSequence> sequences;
  std::vector<std::string> feature_names;  // dense id -> key
  std::unordered_map<std::string, int> feature_index;
  std::vector<std::string> label_names;  // dense id -> tag name

  // Snapshot of what produced the features, carried into trained models so
  // tagging reconstructs the identical extraction.
  FeatureConfig config;
  std::vector<std::string> dictionary_words;
};

/// Extracts and indexes features for a tagged corpus. Features occurring
/// fewer than cfg.min_freq times are not indexed; all nine tags are indexed
/// even if unseen. Errors on empty input.
FeatureDataset build_dataset(
    const std::vector<std::pair<Sentence, TagSequence>>& sentences,
    const FeatureConfig& cfg, const DeviceLexicon& lexicon);

}  // namespace r2iot
