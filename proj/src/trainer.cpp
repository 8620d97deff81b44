// Regularized maximum-likelihood training.
//
// The optimizer is OWL-QN (orthant-wise limited-memory quasi-Newton,
// Andrew & Gao 2007) so the L1 term yields exact zeros; with c1 == 0 it
// reduces to plain L-BFGS with backtracking line search. Everything is a
// pure function of the dataset and config, so training is deterministic.
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "recipe2iot/crf.hpp"

namespace r2iot {

namespace {

constexpr int kHistorySize = 10;
constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 50;

double l1_norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) s += std::abs(x);
  return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Pseudo-gradient of f(w) + c1*||w||_1 at w, given the smooth gradient g.
std::vector<double> pseudo_gradient(const std::vector<double>& w,
                                    const std::vector<double>& g, double c1) {
  if (c1 == 0.0) return g;
  std::vector<double> v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) {
      v[i] = g[i] + c1;
    } else if (w[i] < 0.0) {
      v[i] = g[i] - c1;
    } else if (g[i] + c1 < 0.0) {
      v[i] = g[i] + c1;
    } else if (g[i] - c1 > 0.0) {
      v[i] = g[i] - c1;
    } else {
      v[i] = 0.0;
    }
  }
  return v;
}

struct LbfgsHistory {
  std::deque<std::vector<double>> s, y;
  std::deque<double> rho;

  void push(std::vector<double> si, std::vector<double> yi) {
    double sy = dot(si, yi);
    if (sy <= 1e-10) return;  // skip non-curvature pairs
    s.push_back(std::move(si));
    y.push_back(std::move(yi));
    rho.push_back(1.0 / sy);
    if (s.size() > kHistorySize) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  // Two-loop recursion: d = -H * v.
  std::vector<double> direction(const std::vector<double>& v) const {
    std::vector<double> q = v;
    std::vector<double> alpha(s.size());
    for (std::size_t i = s.size(); i-- > 0;) {
      alpha[i] = rho[i] * dot(s[i], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * y[i][j];
    }
    if (!s.empty()) {
      double gamma = dot(s.back(), y.back()) / dot(y.back(), y.back());
      for (double& x : q) x *= gamma;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      double beta = rho[i] * dot(y[i], q);
      for (std::size_t j = 0; j < q.size(); ++j) {
        q[j] += (alpha[i] - beta) * s[i][j];
      }
    }
    for (double& x : q) x = -x;
    return q;
  }
};

}  // namespace

CrfModel train(const FeatureDataset& data, const TrainConfig& cfg) {
  if (data.sequences.empty()) throw Error("cannot train on an empty dataset");
  if (cfg.c1 < 0.0 || cfg.c2 < 0.0) throw Error("c1 and c2 must be >= 0");
  if (cfg.convergence_tol <= 0.0) throw Error("convergence_tol must be > 0");
  if (cfg.max_iterations < 1) throw Error("max_iterations must be >= 1");

  CrfModel model = make_model(data.label_names, data.feature_names);
  const std::size_t n_state = model.state_weights.size();
  const std::size_t n = n_state + model.transition_weights.size();

  auto set_weights = [&](const std::vector<double>& w) {
    std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n_state),
              model.state_weights.begin());
    std::copy(w.begin() + static_cast<std::ptrdiff_t>(n_state), w.end(),
              model.transition_weights.begin());
  };

  auto evaluate = [&](const std::vector<double>& w, int iteration)
      -> std::pair<double, std::vector<double>> {
    set_weights(w);
    auto [f, g] = nll_and_gradient(model, data, cfg.c2);
    if (!std::isfinite(f)) {
      throw Error("non-finite objective at iteration " +
                  std::to_string(iteration));
    }
    return {f, std::move(g)};
  };

  std::vector<double> w(n, 0.0);
  auto [smooth0, grad] = evaluate(w, 0);
  double objective = smooth0 + cfg.c1 * l1_norm(w);

  LbfgsHistory history;
  int iterations = 0;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    std::vector<double> v = pseudo_gradient(w, grad, cfg.c1);
    double v_max = 0.0;
    for (double x : v) v_max = std::max(v_max, std::abs(x));
    if (v_max == 0.0) break;  // exact stationary point (e.g. L1-dominated)

    std::vector<double> d = history.direction(v);
    if (cfg.c1 > 0.0) {
      // Keep only components that descend w.r.t. the pseudo-gradient.
      for (std::size_t i = 0; i < n; ++i) {
        if (d[i] * v[i] >= 0.0) d[i] = 0.0;
      }
    }
    double d_max = 0.0;
    for (double x : d) d_max = std::max(d_max, std::abs(x));
    if (d_max == 0.0) break;

    // Chosen orthant for the projected line search.
    std::vector<double> xi;
    if (cfg.c1 > 0.0) {
      xi.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        xi[i] = w[i] != 0.0 ? (w[i] > 0.0 ? 1.0 : -1.0)
                            : (v[i] > 0.0 ? -1.0 : (v[i] < 0.0 ? 1.0 : 0.0));
      }
    }

    double step = iter == 1 ? 1.0 / (1.0 + std::sqrt(dot(d, d))) : 1.0;
    std::vector<double> w_new(n);
    double objective_new = 0.0;
    std::vector<double> grad_new;
    bool accepted = false;

    for (int halving = 0; halving < kMaxHalvings; ++halving) {
      double vdw = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double x = w[i] + step * d[i];
        if (cfg.c1 > 0.0 && x * xi[i] < 0.0) x = 0.0;  // orthant projection
        w_new[i] = x;
        vdw += v[i] * (x - w[i]);
      }
      if (vdw >= 0.0) {  // projected step is not a descent step; shrink
        step *= 0.5;
        continue;
      }
      auto [f, g] = evaluate(w_new, iter);
      double obj = f + cfg.c1 * l1_norm(w_new);
      if (obj <= objective + kArmijo * vdw) {
        objective_new = obj;
        grad_new = std::move(g);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step size underflow: no further progress

    std::vector<double> s(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = w_new[i] - w[i];
      yv[i] = grad_new[i] - grad[i];
    }
    history.push(std::move(s), std::move(yv));

    double improvement = objective - objective_new;
    w = std::move(w_new);
    grad = std::move(grad_new);
    objective = objective_new;
    iterations = iter;

    if (improvement / std::max({std::abs(objective), 1.0}) <
        cfg.convergence_tol) {
      break;
    }
  }

  set_weights(w);
  model.metadata.window = data.config.window;
  model.metadata.use_head = data.config.use_head;
  model.metadata.min_freq = data.config.min_freq;
  model.metadata.c1 = cfg.c1;
  model.metadata.c2 = cfg.c2;
  model.metadata.seed = cfg.seed;
  model.metadata.optimizer = cfg.c1 > 0.0 ? "owlqn-lbfgs" : "lbfgs";
  model.metadata.iterations = iterations;
  model.metadata.final_objective = objective;
  model.metadata.dictionary_words = data.dictionary_words;
  model.metadata.stopwords.assign(data.config.stopwords.begin(),
                                  data.config.stopwords.end());
  std::sort(model.metadata.stopwords.begin(), model.metadata.stopwords.end());
  return model;
}

}  // namespace r2iot
