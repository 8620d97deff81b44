// Model construction, scoring and exact inference.
#include "recipe2iot/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace r2iot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Per-position label potentials: psi[t][y] = sum of active state weights.
std::vector<std::vector<double>> state_scores(const CrfModel& model,
                                              const std::vector<FeatureIds>& x) {
  const int L = model.num_labels();
  std::vector<std::vector<double>> psi(x.size(), std::vector<double>(L, 0.0));
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (int f : x[t]) {
      if (f < 0 || f >= model.num_features()) {
        throw Error("feature id " + std::to_string(f) + " out of range");
      }
      const double* row = model.state_weights.data() +
                          static_cast<std::size_t>(f) * static_cast<std::size_t>(L);
      for (int y = 0; y < L; ++y) psi[t][y] += row[y];
    }
  }
  return psi;
}

}  // namespace

CrfModel make_model(std::vector<std::string> labels,
                    std::vector<std::string> feature_names) {
  if (labels.empty()) throw Error("a model needs at least one label");
  CrfModel model;
  model.labels = std::move(labels);
  model.feature_names = std::move(feature_names);
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
    model.feature_index.emplace(model.feature_names[i], static_cast<int>(i));
  }
  model.state_weights.assign(model.feature_names.size() * model.labels.size(),
                             0.0);
  model.transition_weights.assign(model.labels.size() * model.labels.size(),
                                  0.0);
  return model;
}

// The transition is added before the state weights at each position, in the
// same order Viterbi accumulates its path scores, so the two routes agree
// bit for bit.
double score_sequence(const CrfModel& model, const std::vector<FeatureIds>& x,
                      const std::vector<int>& y) {
  if (x.empty()) throw Error("cannot score an empty sequence");
  if (x.size() != y.size()) {
    throw Error("feature/label length mismatch: " + std::to_string(x.size()) +
                " vs " + std::to_string(y.size()));
  }
  const int L = model.num_labels();
  double score = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (y[t] < 0 || y[t] >= L) {
      throw Error("label id " + std::to_string(y[t]) + " out of range");
    }
    if (t > 0) score += model.transition_weight(y[t - 1], y[t]);
    for (int f : x[t]) score += model.state_weight(f, y[t]);
  }
  return score;
}

Posteriors forward_backward(const CrfModel& model,
                            const std::vector<FeatureIds>& x) {
  if (x.empty()) throw Error("cannot run inference on an empty sequence");
  const int L = model.num_labels();
  const std::size_t T = x.size();
  const auto psi = state_scores(model, x);

  std::vector<std::vector<double>> alpha(T, std::vector<double>(L));
  std::vector<std::vector<double>> beta(T, std::vector<double>(L));
  std::vector<double> scratch(L);

  for (int y = 0; y < L; ++y) alpha[0][y] = psi[0][y];
  for (std::size_t t = 1; t < T; ++t) {
    for (int y = 0; y < L; ++y) {
      for (int p = 0; p < L; ++p) {
        scratch[p] = alpha[t - 1][p] + model.transition_weight(p, y);
      }
      alpha[t][y] = psi[t][y] + log_sum_exp(scratch);
    }
  }
  double log_z = log_sum_exp(alpha[T - 1]);

  for (int y = 0; y < L; ++y) beta[T - 1][y] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (int y = 0; y < L; ++y) {
      for (int n = 0; n < L; ++n) {
        scratch[n] =
            model.transition_weight(y, n) + psi[t + 1][n] + beta[t + 1][n];
      }
      beta[t][y] = log_sum_exp(scratch);
    }
  }

  Posteriors post;
  post.log_partition = log_z;
  for (int y = 0; y < L; ++y) scratch[y] = psi[0][y] + beta[0][y];
  post.log_partition_backward = log_sum_exp(scratch);
  post.marginals.assign(T, std::vector<double>(L));
  for (std::size_t t = 0; t < T; ++t) {
    for (int y = 0; y < L; ++y) {
      post.marginals[t][y] = std::exp(alpha[t][y] + beta[t][y] - log_z);
    }
  }
  if (T > 1) {
    post.pairwise_marginals.assign(T - 1, std::vector<double>(L * L));
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (int a = 0; a < L; ++a) {
        for (int b = 0; b < L; ++b) {
          post.pairwise_marginals[t][a * L + b] =
              std::exp(alpha[t][a] + model.transition_weight(a, b) +
                       psi[t + 1][b] + beta[t + 1][b] - log_z);
        }
      }
    }
  }
  return post;
}

std::vector<int> viterbi(const CrfModel& model,
                         const std::vector<FeatureIds>& x) {
  if (x.empty()) throw Error("cannot decode an empty sequence");
  const int L = model.num_labels();
  const std::size_t T = x.size();

  // Path scores accumulate one weight at a time, mirroring score_sequence,
  // so a decoded path's delta equals its score exactly.
  std::vector<std::vector<double>> delta(T, std::vector<double>(L));
  std::vector<std::vector<int>> backptr(T, std::vector<int>(L, 0));
  for (int y = 0; y < L; ++y) {
    double s = 0.0;
    for (int f : x[0]) s += model.state_weight(f, y);
    delta[0][y] = s;
  }
  for (std::size_t t = 1; t < T; ++t) {
    for (int y = 0; y < L; ++y) {
      int best = 0;
      double best_score = delta[t - 1][0] + model.transition_weight(0, y);
      for (int p = 1; p < L; ++p) {
        double s = delta[t - 1][p] + model.transition_weight(p, y);
        if (s > best_score) {  // strict: ties keep the lowest index
          best_score = s;
          best = p;
        }
      }
      for (int f : x[t]) best_score += model.state_weight(f, y);
      delta[t][y] = best_score;
      backptr[t][y] = best;
    }
  }

  int last = 0;
  for (int y = 1; y < L; ++y) {
    if (delta[T - 1][y] > delta[T - 1][last]) last = y;
  }
  std::vector<int> path(T);
  path[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) {
    path[t - 1] = backptr[t][path[t]];
  }
  return path;
}

std::pair<double, std::vector<double>> nll_and_gradient(
    const CrfModel& model, const FeatureDataset& data, double c2) {
  if (data.sequences.empty()) throw Error("empty dataset");
  const int L = model.num_labels();
  const std::size_t n_state = model.state_weights.size();
  std::vector<double> grad(n_state + model.transition_weights.size(), 0.0);
  double nll = 0.0;

  // The hot path runs the scaled (linear-space) forward-backward: potentials
  // are exponentiated once with per-position max shifts and the recursions
  // renormalize every step, so nothing overflows and the log partition is
  // recovered from the accumulated scale factors. The log-space
  // forward_backward above stays as the reference route; the two agree to
  // rounding and both are pinned by tests against brute-force enumeration
  // and finite differences.
  std::vector<double> exp_trans(model.transition_weights.size());
  for (std::size_t ab = 0; ab < exp_trans.size(); ++ab) {
    exp_trans[ab] = std::exp(model.transition_weights[ab]);
  }

  // Flat [T*L] work buffers reused across sequences.
  std::vector<double> potentials, fwd, bwd;
  std::vector<double> row_buf(L), marg(L);

  for (const IndexedSequence& seq : data.sequences) {
    if (seq.items.empty() || seq.items.size() != seq.labels.size()) {
      throw Error("malformed sequence in dataset");
    }
    const std::size_t T = seq.items.size();
    potentials.assign(T * L, 0.0);
    fwd.resize(T * L);
    bwd.resize(T * L);

    double log_z = 0.0;  // accumulates shifts and scale factors
    for (std::size_t t = 0; t < T; ++t) {
      double* row = potentials.data() + t * L;
      for (int f : seq.items[t]) {
        const double* w = model.state_weights.data() +
                          static_cast<std::size_t>(f) * L;
        for (int y = 0; y < L; ++y) row[y] += w[y];
      }
      double shift = row[0];
      for (int y = 1; y < L; ++y) shift = std::max(shift, row[y]);
      for (int y = 0; y < L; ++y) row[y] = std::exp(row[y] - shift);
      log_z += shift;
    }

    for (std::size_t t = 0; t < T; ++t) {
      double* a = fwd.data() + t * L;
      if (t == 0) {
        std::copy(potentials.begin(), potentials.begin() + L, a);
      } else {
        const double* prev = fwd.data() + (t - 1) * L;
        const double* pot = potentials.data() + t * L;
        std::fill(row_buf.begin(), row_buf.end(), 0.0);
        for (int p = 0; p < L; ++p) {
          const double* et = exp_trans.data() + static_cast<std::size_t>(p) * L;
          const double ap = prev[p];
          for (int y = 0; y < L; ++y) row_buf[y] += ap * et[y];
        }
        for (int y = 0; y < L; ++y) a[y] = row_buf[y] * pot[y];
      }
      double total = 0.0;
      for (int y = 0; y < L; ++y) total += a[y];
      if (!(total > 0.0)) throw Error("forward recursion underflow");
      for (int y = 0; y < L; ++y) a[y] /= total;
      log_z += std::log(total);
    }

    for (std::size_t t = T; t-- > 0;) {
      double* b = bwd.data() + t * L;
      if (t + 1 == T) {
        std::fill(b, b + L, 1.0);
      } else {
        const double* next = bwd.data() + (t + 1) * L;
        const double* pot = potentials.data() + (t + 1) * L;
        for (int y = 0; y < L; ++y) row_buf[y] = pot[y] * next[y];
        for (int y = 0; y < L; ++y) {
          const double* et = exp_trans.data() + static_cast<std::size_t>(y) * L;
          double sum = 0.0;
          for (int n = 0; n < L; ++n) sum += et[n] * row_buf[n];
          b[y] = sum;
        }
      }
      double total = 0.0;
      for (int y = 0; y < L; ++y) total += b[y];
      if (!(total > 0.0)) throw Error("backward recursion underflow");
      for (int y = 0; y < L; ++y) b[y] /= total;
    }

    nll += log_z - score_sequence(model, seq.items, seq.labels);

    for (std::size_t t = 0; t < T; ++t) {
      // Positional marginals: renormalized fwd*bwd product.
      const double* a = fwd.data() + t * L;
      const double* b = bwd.data() + t * L;
      double total = 0.0;
      for (int y = 0; y < L; ++y) {
        marg[y] = a[y] * b[y];
        total += marg[y];
      }
      for (int y = 0; y < L; ++y) marg[y] /= total;
      marg[seq.labels[t]] -= 1.0;
      for (int f : seq.items[t]) {
        double* row = grad.data() + static_cast<std::size_t>(f) * L;
        for (int y = 0; y < L; ++y) row[y] += marg[y];
      }

      if (t > 0) {
        // Pairwise marginals: renormalized fwd[a] * M[a][b] * pot[b] * bwd[b].
        const double* ap = fwd.data() + (t - 1) * L;
        const double* pot = potentials.data() + t * L;
        for (int y = 0; y < L; ++y) row_buf[y] = pot[y] * b[y];
        double pair_total = 0.0;
        for (int a2 = 0; a2 < L; ++a2) {
          const double* et = exp_trans.data() + static_cast<std::size_t>(a2) * L;
          for (int b2 = 0; b2 < L; ++b2) {
            pair_total += ap[a2] * et[b2] * row_buf[b2];
          }
        }
        double* gt = grad.data() + n_state;
        for (int a2 = 0; a2 < L; ++a2) {
          const double* et = exp_trans.data() + static_cast<std::size_t>(a2) * L;
          double* out = gt + static_cast<std::size_t>(a2) * L;
          const double scale = ap[a2] / pair_total;
          for (int b2 = 0; b2 < L; ++b2) {
            out[b2] += scale * et[b2] * row_buf[b2];
          }
        }
        gt[static_cast<std::size_t>(seq.labels[t - 1]) * L + seq.labels[t]] -=
            1.0;
      }
    }
  }

  if (c2 > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double w = i < n_state ? model.state_weights[i]
                                   : model.transition_weights[i - n_state];
      sq += w * w;
      grad[i] += c2 * w;
    }
    nll += 0.5 * c2 * sq;
  }
  return {nll, std::move(grad)};
}

std::vector<FeatureIds> index_features(
    const CrfModel& model, const std::vector<FeatureVector>& vectors) {
  std::vector<FeatureIds> out;
  out.reserve(vectors.size());
  for (const FeatureVector& fv : vectors) {
    FeatureIds ids;
    for (const std::string& key : fv) {
      auto it = model.feature_index.find(key);
      if (it != model.feature_index.end()) ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    out.push_back(std::move(ids));
  }
  return out;
}

Tagger::Tagger(const CrfModel& model) : model_(model) {
  config_.window = model.metadata.window;
  config_.use_head = model.metadata.use_head;
  config_.min_freq = model.metadata.min_freq;
  config_.stopwords.clear();
  for (const std::string& w : model.metadata.stopwords) config_.stopwords.insert(w);
  dictionary_ = DeviceLexicon::from_words(model.metadata.dictionary_words);
  for (const std::string& name : model.labels) {
    auto tag = parse_tag(name);
    if (!tag) {
      throw Error("model label '" + name + "' is not one of the nine tags");
    }
    label_tags_.push_back(*tag);
  }
}

TagSequence Tagger::tag(const Sentence& sentence) const {
  TagSequence tags;
  if (sentence.tokens.empty()) return tags;
  auto vectors = sentence_features(sentence, config_, dictionary_);
  auto path = viterbi(model_, index_features(model_, vectors));
  tags.reserve(path.size());
  for (int y : path) tags.push_back(label_tags_[static_cast<std::size_t>(y)]);
  return tags;
}

}  // namespace r2iot
