// Entity-level evaluation, hyperparameter random search with stratified
// cross-validation, feature-group ablation, inter-annotator agreement and
// corpus distribution reports.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "recipe2iot/crf.hpp"

namespace r2iot {

/// (label, token span) entity from a tag sequence; bare I-X is read as B-X,
/// matching the span repair contract.
struct Entity {
  SlotLabel label;
  std::size_t begin = 0;  // token indices, end exclusive
  std::size_t end = 0;

  friend bool operator==(const Entity&, const Entity&) = default;
};

std::vector<Entity> extract_entities(const TagSequence& tags);

struct LabelScore {
  long tp = 0, fp = 0, fn = 0;
  long support_tokens = 0;    // gold non-O tokens ("true labelled words")
  long support_entities = 0;  // gold entity count
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct ScoreReport {
  std::array<LabelScore, 4> per_label;  // indexed by SlotLabel
  LabelScore micro;                     // from summed counts
  // Secondary token-level view over non-O tags.
  double token_precision = 0.0, token_recall = 0.0, token_f1 = 0.0;
};

/// Exact-match entity scoring: a predicted entity is a true positive iff
/// label, start and end all match a gold entity. Gold and pred must be
/// aligned over identical token sequences.
ScoreReport entity_scores(const std::vector<TagSequence>& gold,
                          const std::vector<TagSequence>& pred);

// ---------------------------------------------------------------------------
// Random search
// ---------------------------------------------------------------------------

struct SearchSpace {
  std::array<double, 2> c1_range = {1e-4, 10.0};  // log-uniform
  std::array<double, 2> c2_range = {1e-4, 10.0};  // log-uniform
  std::vector<int> min_freq_choices = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int n_candidates = 80;
  int folds = 3;
  std::uint64_t seed = 0;
};

struct CandidateResult {
  int index = 0;
  double c1 = 0.0, c2 = 0.0;
  int min_freq = 0;
  std::vector<double> fold_f1;
  double mean_f1 = 0.0;  // -inf when failed
  bool failed = false;
  std::string error;
};

struct SearchResult {
  TrainConfig best;
  int best_index = 0;
  std::vector<CandidateResult> table;  // in candidate-index order
};

/// Samples n_candidates (c1, c2 log-uniform; min_freq uniform over the
/// choices), evaluates each by stratified k-fold cross-validation at recipe
/// granularity (mean micro entity F1), and returns the argmax. A failed
/// training marks its candidate -inf and the search continues. Deterministic
/// given space.seed; `jobs` > 1 evaluates candidates in parallel without
/// changing the result.
SearchResult random_search(const std::vector<AnnotatedRecipe>& train_valid,
                           const SearchSpace& space,
                           const FeatureConfig& cfg_base,
                           const DeviceLexicon& lexicon,
                           const TrainConfig& train_base = {}, int jobs = 1);

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string feature_set;  // e.g. "full", "-head", "-window3"
  int window = 0;
  bool use_head = false;
  double micro_f1 = 0.0;
};

/// Trains once per cumulative feature-group removal, in order: full set,
/// minus head-token features, then shrinking the neighbor window 3 -> 0.
/// Reports validation micro entity F1 per configuration.
std::vector<AblationRow> ablation(const std::vector<AnnotatedRecipe>& train,
                                  const std::vector<AnnotatedRecipe>& valid,
                                  const FeatureConfig& cfg_base,
                                  const DeviceLexicon& lexicon,
                                  const TrainConfig& train_cfg);

// ---------------------------------------------------------------------------
// Agreement and distributions
// ---------------------------------------------------------------------------

/// Micro entity F1 between two annotators over the same sentences (matched
/// by text). Symmetric; errors when the sentence sets differ.
double agreement_f1(const std::vector<DoccanoEntry>& a,
                    const std::vector<DoccanoEntry>& b);

struct DistributionRow {
  std::string device;  // "all" when not split per device
  SlotLabel label;
  long count = 0;      // labeled spans
  double percent = 0.0;  // of the device's spans; sums to 100 per device
};

struct DistributionReport {
  std::vector<DistributionRow> rows;  // grouped by device, label order fixed
  std::vector<std::pair<std::string, long>> totals;  // spans per device
};

DistributionReport label_distribution(
    const std::vector<AnnotatedRecipe>& corpus, bool per_device);

}  // namespace r2iot
