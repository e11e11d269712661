#pragma once

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vrsim/latency.hpp"
#include "vrsim/neural.hpp"
#include "vrsim/rng.hpp"

namespace vrsim {

/// Sliding per-user history of observed FoV indices, length T0 once warm.
struct ObservationWindow {
  int capacity = 20;
  std::deque<int> fovs;

  void push(int fov) {
    fovs.push_back(fov);
    while (static_cast<int>(fovs.size()) > capacity) fovs.pop_front();
  }
  bool warm() const { return static_cast<int>(fovs.size()) == capacity; }
  std::vector<int> contents() const { return {fovs.begin(), fovs.end()}; }
};

struct PredictorConfig {
  int n_fov = 8;
  int window = 20;          // T0
  int hidden = 64;
  double learning_rate = 0.005;
  int batch_size = 64;      // T_b
  int epochs = 200;
  int batches_per_epoch = 20;
  double holdout_fraction = 0.2;
  int eval_cap = 2000;          // held-out subsample per epoch
  double early_stop_accuracy = 101.0;  // percent; >100 disables
  bool shared = true;           // one model across users
};

struct Prediction {
  Vec probs;
  int fov = 0;
  bool warm = true;
};

/// GRU over one-hot FoV history plus a linear softmax head of N_FoV units.
struct PredictorModel {
  int n_fov = 0;
  int window = 0;
  double learning_rate = 0.005;
  GruCell gru;
  Mlp head;  // single linear layer hidden -> n_fov

  PredictorModel() = default;
  PredictorModel(const PredictorConfig& cfg, Rng& rng)
      : n_fov(cfg.n_fov),
        window(cfg.window),
        learning_rate(cfg.learning_rate),
        gru(cfg.n_fov, cfg.hidden),
        head({cfg.hidden, cfg.n_fov}) {
    gru.init(rng);
    head.init(rng);
  }

  Vec one_hot(int fov) const {
    Vec x(n_fov, 0.0);
    x.at(fov) = 1.0;
    return x;
  }

  Vec hidden_for(const std::vector<int>& history, std::vector<GruCell::StepCache>* caches = nullptr) const {
    Vec h(gru.hidden, 0.0);
    if (caches != nullptr) caches->resize(history.size());
    for (std::size_t t = 0; t < history.size(); ++t)
      h = gru.step(one_hot(history[t]), h, caches != nullptr ? &(*caches)[t] : nullptr);
    return h;
  }

  ParameterSet checkpoint() const {
    ParameterSet all;
    for (const Array& a : gru.params.arrays) {
      Array& c = all.add("gru." + a.name, a.shape);
      c.data = a.data;
    }
    for (const Array& a : head.params.arrays) {
      Array& c = all.add("head." + a.name, a.shape);
      c.data = a.data;
    }
    return all;
  }

  void restore(const ParameterSet& all) {
    for (Array& a : gru.params.arrays) a.data = all.get("gru." + a.name).data;
    for (Array& a : head.params.arrays) a.data = all.get("head." + a.name).data;
  }
};

/// Probability vector over FoVs and its argmax (lowest index wins ties).
/// Cold windows yield a uniform prediction flagged as warm-up.
inline Prediction predict_next(const PredictorModel& model, const ObservationWindow& window) {
  Prediction p;
  if (!window.warm()) {
    p.probs.assign(model.n_fov, 1.0 / model.n_fov);
    p.fov = 0;
    p.warm = false;
    return p;
  }
  const Vec h = model.hidden_for(window.contents());
  p.probs = softmax(model.head.forward(h));
  p.fov = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  return p;
}

struct TrainingSample {
  std::vector<int> history;
  int target = 0;
};

/// One SGD step on the summed cross-entropy over the minibatch; returns the
/// summed loss.
inline double train_step(PredictorModel& model, const std::vector<TrainingSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  ParameterSet g_gru = model.gru.params.zeros_like();
  ParameterSet g_head = model.head.params.zeros_like();
  double loss = 0.0;
  for (const TrainingSample& s : batch) {
    std::vector<GruCell::StepCache> caches;
    const Vec h = model.hidden_for(s.history, &caches);
    Mlp::Cache head_cache;
    const Vec logits = model.head.forward(h, &head_cache);
    const Vec probs = softmax(logits);
    loss += -std::log(std::max(probs.at(s.target), 1e-300));
    Vec dlogits = probs;
    dlogits[s.target] -= 1.0;
    Vec dh;
    accumulate(g_head, model.head.backward(head_cache, dlogits, &dh));
    for (std::size_t t = caches.size(); t-- > 0;) dh = model.gru.step_backward(caches[t], dh, g_gru);
  }
  sgd_step(model.gru.params, g_gru, model.learning_rate);
  sgd_step(model.head.params, g_head, model.learning_rate);
  return loss;
}

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;      // mean summed-batch loss over the epoch
  double accuracy = 0.0;  // held-out exact-match, percent
};

struct TrainedPredictor {
  PredictorModel model;
  std::vector<EpochStats> curve;
  double final_accuracy = 0.0;  // full held-out set
};

namespace detail {
inline double evaluate_accuracy(const PredictorModel& model, const std::vector<TrainingSample>& set,
                                std::size_t cap) {
  const std::size_t n = std::min(cap, set.size());
  if (n == 0) return 0.0;
  const std::size_t stride = std::max<std::size_t>(1, set.size() / n);
  std::vector<int> actual, predicted;
  for (std::size_t i = 0; i < set.size(); i += stride) {
    const Vec h = model.hidden_for(set[i].history);
    const Vec probs = softmax(model.head.forward(h));
    predicted.push_back(
        static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
    actual.push_back(set[i].target);
  }
  return prediction_accuracy(actual, predicted);
}
}  // namespace detail

/// Builds (window, next-FoV) samples from traces; the final holdout fraction
/// of every trace is reserved for accuracy reporting.
inline void build_samples(const std::vector<std::vector<int>>& traces, int window,
                          double holdout_fraction, std::vector<TrainingSample>& train,
                          std::vector<TrainingSample>& holdout) {
  for (const std::vector<int>& trace : traces) {
    if (static_cast<int>(trace.size()) < window + 1)
      throw std::invalid_argument("build_samples: trace shorter than T0+1");
    const std::size_t split =
        trace.size() - static_cast<std::size_t>(holdout_fraction * static_cast<double>(trace.size()));
    for (std::size_t t = window; t < trace.size(); ++t) {
      TrainingSample s;
      s.history.assign(trace.begin() + (t - window), trace.begin() + t);
      s.target = trace[t];
      (t < split ? train : holdout).push_back(std::move(s));
    }
  }
}

/// Minibatch-SGD training over Brownian traces with a per-epoch held-out
/// accuracy series. Deterministic given the rng state.
inline TrainedPredictor train_predictor(const std::vector<std::vector<int>>& traces,
                                        const PredictorConfig& cfg, Rng& rng) {
  std::vector<TrainingSample> train, holdout;
  build_samples(traces, cfg.window, cfg.holdout_fraction, train, holdout);
  TrainedPredictor out{PredictorModel(cfg, rng), {}, 0.0};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      std::vector<TrainingSample> batch;
      batch.reserve(cfg.batch_size);
      for (int i = 0; i < cfg.batch_size; ++i)
        batch.push_back(train[rng.uniform_int(static_cast<int>(train.size()))]);
      loss += train_step(out.model, batch);
    }
    EpochStats st;
    st.epoch = epoch;
    st.loss = loss / cfg.batches_per_epoch;
    st.accuracy = detail::evaluate_accuracy(out.model, holdout, cfg.eval_cap);
    out.curve.push_back(st);
    if (st.accuracy >= cfg.early_stop_accuracy) break;
  }
  out.final_accuracy = detail::evaluate_accuracy(out.model, holdout, holdout.size());
  return out;
}

}  // namespace vrsim
