#include "recipe2iot/features.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace r2iot {

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",       "about",   "above",   "after",   "again",   "against",
      "all",     "am",      "an",      "and",     "any",     "are",
      "as",      "at",      "be",      "because", "been",    "before",
      "being",   "below",   "between", "both",    "but",     "by",
      "can",     "cannot",  "could",   "did",     "do",      "does",
      "doing",   "down",    "during",  "each",    "few",     "for",
      "from",    "further", "had",     "has",     "have",    "having",
      "he",      "her",     "here",    "hers",    "herself", "him",
      "himself", "his",     "how",     "i",       "if",      "in",
      "into",    "is",      "it",      "its",     "itself",  "just",
      "me",      "more",    "most",    "my",      "myself",  "no",
      "nor",     "not",     "now",     "of",      "off",     "on",
      "once",    "only",    "onto",    "or",      "other",   "our",
      "ours",    "ourselves", "out",   "over",    "own",     "same",
      "shall",   "she",     "should",  "so",      "some",    "such",
      "than",    "that",    "the",     "their",   "theirs",  "them",
      "themselves", "then", "there",   "these",   "they",    "this",
      "those",   "through", "to",      "too",     "under",   "until",
      "up",      "upon",    "us",      "very",    "was",     "we",
      "were",    "what",    "when",    "where",   "which",   "while",
      "who",     "whom",    "why",     "will",    "with",    "within",
      "without", "would",   "you",     "your",    "yours",   "yourself",
      "yourselves"};
  return kStopwords;
}

std::unordered_set<std::string> load_stopwords(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    words.insert(to_lower(sv));
  }
  return words;
}

std::unordered_set<std::string> load_stopwords_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stopword file: " + path);
  return load_stopwords(in);
}

namespace {

void check_config(const FeatureConfig& cfg) {
  if (cfg.window < 0 || cfg.window > 3) {
    throw Error("feature window must be in {0,1,2,3}, got " +
                std::to_string(cfg.window));
  }
  if (cfg.min_freq < 0) throw Error("min_freq must be >= 0");
}

void emit_group(const Token& tok, const std::string& prefix,
                const FeatureConfig& cfg, const DeviceLexicon& lexicon,
                FeatureVector& out) {
  std::string form = to_lower(tok.text);
  bool capitalized = !tok.text.empty() && tok.text[0] >= 'A' && tok.text[0] <= 'Z';
  bool alphabetic =
      !form.empty() && std::all_of(form.begin(), form.end(), is_ascii_alpha);

  out.insert(prefix + "w=" + form);
  out.insert(prefix + "lemma=" + (tok.lemma ? to_lower(*tok.lemma) : form));
  out.insert(prefix + "first=" + form.substr(0, 1));
  out.insert(prefix + "prefix3=" + form.substr(0, 3));
  if (tok.pos) out.insert(prefix + "pos=" + *tok.pos);
  out.insert(prefix + "cap=" + std::string(capitalized ? "true" : "false"));
  out.insert(prefix + "indict=" +
             std::string(lexicon.contains_word(form) ? "true" : "false"));
  out.insert(prefix + "alpha=" + std::string(alphabetic ? "true" : "false"));
  out.insert(prefix + "stop=" +
             std::string(cfg.stopwords.count(form) ? "true" : "false"));
}

}  // namespace

FeatureVector token_features(const Sentence& sentence, std::size_t i,
                             const FeatureConfig& cfg,
                             const DeviceLexicon& lexicon) {
  check_config(cfg);
  const auto& tokens = sentence.tokens;
  if (i >= tokens.size()) {
    throw Error("token index " + std::to_string(i) + " out of range for a " +
                std::to_string(tokens.size()) + "-token sentence");
  }

  FeatureVector out;
  emit_group(tokens[i], "", cfg, lexicon, out);

  for (int offset = -cfg.window; offset <= cfg.window; ++offset) {
    if (offset == 0) continue;
    std::string prefix =
        (offset > 0 ? "+" + std::to_string(offset) : std::to_string(offset)) +
        ":";
    std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + offset;
    if (j < 0) {
      out.insert(prefix + "BOS");
    } else if (j >= static_cast<std::ptrdiff_t>(tokens.size())) {
      out.insert(prefix + "EOS");
    } else {
      emit_group(tokens[static_cast<std::size_t>(j)], prefix, cfg, lexicon, out);
    }
  }

  if (cfg.use_head && tokens[i].head) {
    std::size_t h = *tokens[i].head;
    if (h >= tokens.size()) {
      throw Error("head index " + std::to_string(h) + " out of range");
    }
    emit_group(tokens[h], "head:", cfg, lexicon, out);
  }
  return out;
}

std::vector<FeatureVector> sentence_features(const Sentence& sentence,
                                             const FeatureConfig& cfg,
                                             const DeviceLexicon& lexicon) {
  std::vector<FeatureVector> out;
  out.reserve(sentence.tokens.size());
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    out.push_back(token_features(sentence, i, cfg, lexicon));
  }
  return out;
}

FeatureDataset build_dataset(
    const std::vector<std::pair<Sentence, TagSequence>>& sentences,
    const FeatureConfig& cfg, const DeviceLexicon& lexicon) {
  check_config(cfg);
  if (sentences.empty()) throw Error("cannot build a dataset from zero sentences");

  std::vector<std::vector<FeatureVector>> extracted;
  std::vector<std::size_t> kept;  // indices of non-empty sentences
  extracted.reserve(sentences.size());
  std::unordered_map<std::string, long> counts;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& [sentence, tags] = sentences[s];
    if (tags.size() != sentence.tokens.size()) {
      throw Error("tag sequence length does not match token count in \"" +
                  sentence.text + "\"");
    }
    if (sentence.tokens.empty()) continue;
    auto vectors = sentence_features(sentence, cfg, lexicon);
    for (const FeatureVector& fv : vectors) {
      for (const std::string& key : fv) ++counts[key];
    }
    extracted.push_back(std::move(vectors));
    kept.push_back(s);
  }
  if (kept.empty()) throw Error("cannot build a dataset from zero tokens");

  FeatureDataset dataset;
  dataset.config = cfg;
  dataset.dictionary_words = lexicon.all_words();
  for (int t = 0; t < kNumTags; ++t) {
    dataset.label_names.emplace_back(tag_name(static_cast<Tag>(t)));
  }

  // Index surviving features in first-occurrence order.
  for (const auto& vectors : extracted) {
    for (const FeatureVector& fv : vectors) {
      for (const std::string& key : fv) {
        if (counts[key] < cfg.min_freq) continue;
        if (dataset.feature_index.emplace(key, dataset.feature_names.size())
                .second) {
          dataset.feature_names.push_back(key);
        }
      }
    }
  }

  dataset.sequences.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    IndexedSequence seq;
    seq.items.reserve(extracted[k].size());
    for (const FeatureVector& fv : extracted[k]) {
      FeatureIds ids;
      for (const std::string& key : fv) {
        auto it = dataset.feature_index.find(key);
        if (it != dataset.feature_index.end()) ids.push_back(it->second);
      }
      std::sort(ids.begin(), ids.end());
      seq.items.push_back(std::move(ids));
    }
    for (Tag t : sentences[kept[k]].second) {
      seq.labels.push_back(static_cast<int>(t));
    }
    dataset.sequences.push_back(std::move(seq));
  }
  return dataset;
}

}  // namespace r2iot
