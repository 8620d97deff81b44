// Linear-chain conditional random field: scoring, exact inference
// (forward-backward, Viterbi), regularized maximum-likelihood training and
// model serialization.
//
// The parameterization is the classic one: a state weight per
// (feature, label) pair and a feature-independent transition weight per
// (label, label) pair, with implicit uniform start/stop. All inference runs
// in log-space double precision.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recipe2iot/features.hpp"

namespace r2iot {

struct TrainConfig {
  double c1 = 0.0;  // L1 strength
  double c2 = 0.0;  // L2 strength
  int min_freq = 0;
  int max_iterations = 200;
  double convergence_tol = 1e-6;  // relative objective improvement
  std::uint64_t seed = 0;
};

struct CrfMetadata {
  int window = 3;
  bool use_head = true;
  int min_freq = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::uint64_t seed = 0;
  std::string optimizer = "owlqn-lbfgs";
  int iterations = 0;
  double final_objective = 0.0;
  // Feature-side snapshot so a saved model tags exactly as it trained.
  std::vector<std::string> dictionary_words;
  std::vector<std::string> stopwords;
};

struct CrfModel {
  std::vector<std::string> labels;         // dense label id -> name
  std::vector<std::string> feature_names;  // dense feature id -> key
  std::unordered_map<std::string, int> feature_index;
  std::vector<double> state_weights;       // [feature * L + label]
  std::vector<double> transition_weights;  // [prev * L + next]
  CrfMetadata metadata;

  int num_labels() const { return static_cast<int>(labels.size()); }
  int num_features() const { return static_cast<int>(feature_names.size()); }

  double state_weight(int feature, int label) const {
    return state_weights[static_cast<std::size_t>(feature) * labels.size() +
                         static_cast<std::size_t>(label)];
  }
  double transition_weight(int prev, int next) const {
    return transition_weights[static_cast<std::size_t>(prev) * labels.size() +
                              static_cast<std::size_t>(next)];
  }
};

/// Zero-weight model over the given label and feature name sets.
CrfModel make_model(std::vector<std::string> labels,
                    std::vector<std::string> feature_names);

/// Unnormalized log-potential of labeling y:
///   sum_t state(x_t, y_t) + sum_t transition(y_{t-1}, y_t).
/// Errors when |x| != |y| or the sequence is empty.
double score_sequence(const CrfModel& model, const std::vector<FeatureIds>& x,
                      const std::vector<int>& y);

struct Posteriors {
  double log_partition = 0.0;           // from the forward pass
  double log_partition_backward = 0.0;  // same quantity via the backward pass
  std::vector<std::vector<double>> marginals;  // [T][L], each row sums to 1
  std::vector<std::vector<double>> pairwise_marginals;  // [T-1][L*L]
};

/// Exact inference via the forward-backward recursions (log-sum-exp).
Posteriors forward_backward(const CrfModel& model,
                            const std::vector<FeatureIds>& x);

/// Argmax labeling; ties break toward the lowest label index.
std::vector<int> viterbi(const CrfModel& model,
                         const std::vector<FeatureIds>& x);

/// Negative conditional log-likelihood of the dataset plus (c2/2)*||w||^2,
/// with its gradient (model expectations minus empirical counts plus c2*w).
/// Gradient layout: state weights [f*L + y] followed by transitions
/// [a*L + b].
std::pair<double, std::vector<double>> nll_and_gradient(
    const CrfModel& model, const FeatureDataset& data, double c2);

/// L1/L2-regularized maximum likelihood via OWL-QN (orthant-wise L-BFGS;
/// plain L-BFGS when c1 == 0). Deterministic given the dataset and config.
/// Errors if the objective turns non-finite.
CrfModel train(const FeatureDataset& data, const TrainConfig& cfg);

// Versioned line-oriented text container; weights are stored as hex floats
// so a round-trip is bit-exact.
void save_model(const CrfModel& model, std::ostream& out);
void save_model_file(const CrfModel& model, const std::string& path);
CrfModel load_model(std::istream& in);
CrfModel load_model_file(const std::string& path);

/// Maps string features onto the model's feature ids; unknown keys drop out.
std::vector<FeatureIds> index_features(const CrfModel& model,
                                       const std::vector<FeatureVector>& vectors);

/// Decodes sentences with a trained model, rebuilding the training-time
/// feature extraction (window, head, stopwords, dictionary) from metadata.
class Tagger {
 public:
  explicit Tagger(const CrfModel& model);
  TagSequence tag(const Sentence& sentence) const;

 private:
  const CrfModel& model_;
  FeatureConfig config_;
  DeviceLexicon dictionary_;
  std::vector<Tag> label_tags_;  // model label id -> Tag
};

}  // namespace r2iot
