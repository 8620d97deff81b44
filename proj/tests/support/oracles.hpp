// Independent oracles for the CRF: exhaustive enumeration over all L^T
// labelings and central finite differences. Deliberately brute force and
// kept apart from the implementation they check.
#pragma once

#include <cmath>
#include <vector>

#include "recipe2iot/crf.hpp"
#include "recipe2iot/rng.hpp"

namespace r2iot::testing {

inline double brute_force_log_z(const CrfModel& model,
                                const std::vector<FeatureIds>& x) {
  const int L = model.num_labels();
  const std::size_t T = x.size();
  std::vector<int> labeling(T, 0);
  double max_score = -1e300;
  std::vector<double> scores;
  while (true) {
    scores.push_back(score_sequence(model, x, labeling));
    max_score = std::max(max_score, scores.back());
    std::size_t pos = 0;
    while (pos < T && ++labeling[pos] == L) {
      labeling[pos] = 0;
      ++pos;
    }
    if (pos == T) break;
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - max_score);
  return max_score + std::log(sum);
}

inline double brute_force_best_score(const CrfModel& model,
                                     const std::vector<FeatureIds>& x) {
  const int L = model.num_labels();
  const std::size_t T = x.size();
  std::vector<int> labeling(T, 0);
  double best = -1e300;
  while (true) {
    best = std::max(best, score_sequence(model, x, labeling));
    std::size_t pos = 0;
    while (pos < T && ++labeling[pos] == L) {
      labeling[pos] = 0;
      ++pos;
    }
    if (pos == T) break;
  }
  return best;
}

/// Central finite differences of the regularized NLL at the model's current
/// weights. Returns the same layout as nll_and_gradient.
inline std::vector<double> finite_difference_gradient(CrfModel model,
                                                      const FeatureDataset& data,
                                                      double c2,
                                                      double h = 1e-5) {
  auto objective = [&](const CrfModel& m) {
    return nll_and_gradient(m, data, c2).first;
  };
  const std::size_t n_state = model.state_weights.size();
  const std::size_t n = n_state + model.transition_weights.size();
  std::vector<double> grad(n);
  auto at = [&](std::size_t i) -> double& {
    return i < n_state ? model.state_weights[i]
                       : model.transition_weights[i - n_state];
  };
  for (std::size_t i = 0; i < n; ++i) {
    double saved = at(i);
    at(i) = saved + h;
    double up = objective(model);
    at(i) = saved - h;
    double down = objective(model);
    at(i) = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

struct RandomInstance {
  CrfModel model;
  std::vector<FeatureIds> x;
};

/// Model with random weights in [-2, 2] and a random feature activation per
/// position. T in [1, max_t], L in [2, max_l].
inline RandomInstance random_instance(Rng& rng, int max_t = 6, int max_l = 5,
                                      int max_features = 6) {
  const int L = 2 + static_cast<int>(rng.next_index(max_l - 1));
  const int T = 1 + static_cast<int>(rng.next_index(max_t));
  const int F = 1 + static_cast<int>(rng.next_index(max_features));

  std::vector<std::string> labels, features;
  for (int i = 0; i < L; ++i) labels.push_back("L" + std::to_string(i));
  for (int i = 0; i < F; ++i) features.push_back("f" + std::to_string(i));

  RandomInstance inst{make_model(std::move(labels), std::move(features)), {}};
  for (double& w : inst.model.state_weights) w = rng.uniform(-2.0, 2.0);
  for (double& w : inst.model.transition_weights) w = rng.uniform(-2.0, 2.0);

  inst.x.resize(T);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      if (rng.next_double() < 0.5) inst.x[t].push_back(f);
    }
  }
  return inst;
}

/// Random tiny labeled dataset over the given instance shape, for gradient
/// checks.
inline FeatureDataset random_dataset(Rng& rng, int n_sequences, int max_t = 4,
                                     int max_l = 4, int max_features = 5) {
  const int L = 2 + static_cast<int>(rng.next_index(max_l - 1));
  const int F = 1 + static_cast<int>(rng.next_index(max_features));
  FeatureDataset data;
  for (int i = 0; i < L; ++i) data.label_names.push_back("L" + std::to_string(i));
  for (int i = 0; i < F; ++i) {
    data.feature_names.push_back("f" + std::to_string(i));
    data.feature_index.emplace(data.feature_names.back(), i);
  }
  for (int s = 0; s < n_sequences; ++s) {
    const int T = 1 + static_cast<int>(rng.next_index(max_t));
    IndexedSequence seq;
    for (int t = 0; t < T; ++t) {
      FeatureIds ids;
      for (int f = 0; f < F; ++f) {
        if (rng.next_double() < 0.5) ids.push_back(f);
      }
      seq.items.push_back(std::move(ids));
      seq.labels.push_back(static_cast<int>(rng.next_index(L)));
    }
    data.sequences.push_back(std::move(seq));
  }
  return data;
}

}  // namespace r2iot::testing
