#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vrsim/env.hpp"
#include "vrsim/neural.hpp"
#include "vrsim/rng.hpp"

namespace vrsim {

/// Layout of the factorized action heads in a network output vector:
/// per-user serving heads of B values, then (migration scheme only)
/// per-FoV rendering heads of B values. The joint Q of an action is the sum
/// of its selected head entries.
struct HeadLayout {
  int users = 0;
  int mecs = 0;
  int n_fov = 0;
  bool rendering = false;

  int output_dim() const { return users * mecs + (rendering ? n_fov * mecs : 0); }
  int serving_offset(int user) const { return user * mecs; }
  int rendering_offset(int fov) const { return users * mecs + fov * mecs; }
};

inline HeadLayout head_layout_for(const EnvState& s, Scheme scheme) {
  return HeadLayout{s.users, s.mecs, s.n_fov, scheme == Scheme::MecMigration};
}

namespace detail {
inline std::vector<int> fov_hosts(const std::vector<int>& serving, const std::vector<int>& fovs,
                                  int fov) {
  std::vector<int> hosts;
  for (std::size_t u = 0; u < serving.size(); ++u)
    if (fovs[u] == fov && std::find(hosts.begin(), hosts.end(), serving[u]) == hosts.end())
      hosts.push_back(serving[u]);
  std::sort(hosts.begin(), hosts.end());
  return hosts;
}
}  // namespace detail

/// Greedy valid action from head values; lowest-index tie-break throughout.
inline ActionVector greedy_action(const Vec& head_values, const std::vector<int>& fovs,
                                  const HeadLayout& layout) {
  ActionVector a;
  a.serving.resize(layout.users);
  for (int k = 0; k < layout.users; ++k) {
    const int off = layout.serving_offset(k);
    int best = 0;
    for (int b = 1; b < layout.mecs; ++b)
      if (head_values[off + b] > head_values[off + best]) best = b;
    a.serving[k] = best;
  }
  if (layout.rendering) {
    a.rendering.assign(layout.n_fov, -1);
    for (int q = 0; q < layout.n_fov; ++q) {
      const std::vector<int> hosts = detail::fov_hosts(a.serving, fovs, q);
      if (hosts.empty()) continue;
      const int off = layout.rendering_offset(q);
      int best = hosts.front();
      for (int h : hosts)
        if (head_values[off + h] > head_values[off + best]) best = h;
      a.rendering[q] = best;
    }
  }
  return a;
}

inline ActionVector random_action(const std::vector<int>& fovs, const HeadLayout& layout, Rng& rng) {
  ActionVector a;
  a.serving.resize(layout.users);
  for (int k = 0; k < layout.users; ++k) a.serving[k] = rng.uniform_int(layout.mecs);
  if (layout.rendering) {
    a.rendering.assign(layout.n_fov, -1);
    for (int q = 0; q < layout.n_fov; ++q) {
      const std::vector<int> hosts = detail::fov_hosts(a.serving, fovs, q);
      if (!hosts.empty()) a.rendering[q] = hosts[rng.uniform_int(static_cast<int>(hosts.size()))];
    }
  }
  return a;
}

/// Joint Q of a concrete action: sum of its selected head entries.
inline double action_value(const Vec& head_values, const ActionVector& a, const HeadLayout& layout) {
  double v = 0.0;
  for (int k = 0; k < layout.users; ++k) v += head_values[layout.serving_offset(k) + a.serving[k]];
  if (layout.rendering)
    for (int q = 0; q < layout.n_fov; ++q)
      if (q < static_cast<int>(a.rendering.size()) && a.rendering[q] >= 0)
        v += head_values[layout.rendering_offset(q) + a.rendering[q]];
  return v;
}

inline double greedy_value(const Vec& head_values, const std::vector<int>& fovs,
                           const HeadLayout& layout) {
  return action_value(head_values, greedy_action(head_values, fovs, layout), layout);
}

// ---- replay ---------------------------------------------------------------

struct Transition {
  Vec state;
  ActionVector action;
  double reward = 0.0;
  Vec next_state;
  std::vector<int> next_fovs;  // masks for the bootstrap greedy value
  bool terminal = false;
};

/// Ring storage with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  }

  void push(Transition t) {
    if (!std::isfinite(t.reward)) throw std::invalid_argument("ReplayBuffer: non-finite reward");
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  std::size_t sample_index(Rng& rng) const { return rng.uniform_int(static_cast<int>(data_.size())); }

  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
    if (data_.size() < batch) throw std::invalid_argument("ReplayBuffer: insufficient samples");
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&data_[sample_index(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

/// Linear decay from start to end over the first decay_fraction of training,
/// then constant.
struct EpsSchedule {
  double start = 1.0;
  double end = 0.05;
  double decay_fraction = 0.6;

  double at(std::size_t step, std::size_t total_steps) const {
    const double horizon = decay_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return end;
    return start + (end - start) * static_cast<double>(step) / horizon;
  }
};

// ---- DQN ------------------------------------------------------------------

struct DqnConfig {
  std::vector<int> hidden = {128, 128};
  double learning_rate = 0.05;
  double gamma = 0.9;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 10000;
  int target_period = 100;  // gradient steps between target syncs
};

class DqnAgent {
 public:
  DqnAgent(int input_dim, HeadLayout layout, DqnConfig cfg, Rng& init_rng)
      : layout_(layout), cfg_(cfg), buffer_(cfg.replay_capacity) {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(layout.output_dim());
    q_ = Mlp(sizes);
    q_.init(init_rng);
    target_ = q_;
  }

  const HeadLayout& layout() const { return layout_; }
  const DqnConfig& config() const { return cfg_; }
  Mlp& q_network() { return q_; }
  const Mlp& q_network() const { return q_; }
  const Mlp& target_network() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  int update_count() const { return updates_; }

  /// Epsilon-greedy over environment-valid actions only.
  ActionVector select_action(const Vec& encoded, const std::vector<int>& fovs, double eps, Rng& rng) {
    if (rng.uniform() < eps) return random_action(fovs, layout_, rng);
    return greedy_action(q_.forward(encoded), fovs, layout_);
  }

  Vec head_values(const Vec& encoded) const { return q_.forward(encoded); }

  /// One SGD step on the mean squared TD error of the minibatch; the target
  /// network stays frozen. Syncs the target every target_period updates.
  double update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("DqnAgent::update: empty batch");
    ParameterSet grads = q_.params.zeros_like();
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const Transition* t : batch) {
      double y = t->reward;
      if (!t->terminal)
        y += cfg_.gamma * greedy_value(target_.forward(t->next_state), t->next_fovs, layout_);
      Mlp::Cache cache;
      const Vec qv = q_.forward(t->state, &cache);
      const double qsa = action_value(qv, t->action, layout_);
      loss += (y - qsa) * (y - qsa) * inv;
      Vec dq(qv.size(), 0.0);
      const double d = 2.0 * (qsa - y) * inv;
      for (int k = 0; k < layout_.users; ++k) dq[layout_.serving_offset(k) + t->action.serving[k]] += d;
      if (layout_.rendering)
        for (int q = 0; q < layout_.n_fov; ++q)
          if (q < static_cast<int>(t->action.rendering.size()) && t->action.rendering[q] >= 0)
            dq[layout_.rendering_offset(q) + t->action.rendering[q]] += d;
      accumulate(grads, q_.backward(cache, dq));
    }
    sgd_step(q_.params, grads, cfg_.learning_rate);
    ++updates_;
    if (updates_ % cfg_.target_period == 0) sync_target();
    return loss;
  }

  /// Target <- online, byte-identical copy.
  void sync_target() { target_ = q_; }

 private:
  HeadLayout layout_;
  DqnConfig cfg_;
  Mlp q_;
  Mlp target_;
  ReplayBuffer buffer_;
  int updates_ = 0;
};

// ---- Actor-Critic ---------------------------------------------------------

struct AcConfig {
  std::vector<int> hidden = {128, 128};
  double lr_actor = 0.005;
  double lr_critic = 0.05;
  double gamma = 0.9;
};

class AcAgent {
 public:
  AcAgent(int input_dim, HeadLayout layout, AcConfig cfg, Rng& init_rng)
      : layout_(layout), cfg_(cfg) {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    std::vector<int> actor_sizes = sizes;
    actor_sizes.push_back(layout.output_dim());
    std::vector<int> critic_sizes = sizes;
    critic_sizes.push_back(1);
    actor_ = Mlp(actor_sizes);
    actor_.init(init_rng);
    critic_ = Mlp(critic_sizes);
    critic_.init(init_rng);
  }

  const HeadLayout& layout() const { return layout_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }

  double value(const Vec& encoded) const { return critic_.forward(encoded)[0]; }

  /// Samples the joint action from the factorized policy: per-user softmax
  /// over MECs, then per requested FoV a softmax over its serving MECs.
  ActionVector sample_action(const Vec& encoded, const std::vector<int>& fovs, Rng& rng) const;

  /// log pi(A|S) under the current actor, with the same masking that
  /// produced the action.
  double log_prob(const Vec& encoded, const ActionVector& a, const std::vector<int>& fovs) const {
    const Vec logits = actor_.forward(encoded);
    return log_prob_from_logits(logits, a, fovs);
  }

  struct UpdateResult {
    double td_error = 0.0;
    double value = 0.0;
  };

  /// One online TD(0) update: critic toward the bootstrap target, actor
  /// along delta * grad log pi.
  UpdateResult update(const Transition& t, const std::vector<int>& fovs_at_state) {
    Mlp::Cache vc;
    const double v = critic_.forward(t.state, &vc)[0];
    double target = t.reward;
    if (!t.terminal) target += cfg_.gamma * critic_.forward(t.next_state)[0];
    const double delta = target - v;

    ParameterSet vg = critic_.backward(vc, Vec{1.0});
    sgd_ascent(critic_.params, vg, cfg_.lr_critic * delta);

    Mlp::Cache ac;
    const Vec logits = actor_.forward(t.state, &ac);
    Vec dlogits(logits.size(), 0.0);
    grad_log_prob(logits, t.action, fovs_at_state, dlogits);
    ParameterSet ag = actor_.backward(ac, dlogits);
    sgd_ascent(actor_.params, ag, cfg_.lr_actor * delta);
    return UpdateResult{delta, v};
  }

  /// d log pi / d logits, written into dlogits (for gradient tests).
  void grad_log_prob(const Vec& logits, const ActionVector& a, const std::vector<int>& fovs,
                     Vec& dlogits) const {
    for (int k = 0; k < layout_.users; ++k) {
      const int off = layout_.serving_offset(k);
      const Vec p = head_softmax(logits, off, layout_.mecs);
      for (int b = 0; b < layout_.mecs; ++b) dlogits[off + b] -= p[b];
      dlogits[off + a.serving[k]] += 1.0;
    }
    if (layout_.rendering) {
      for (int q = 0; q < layout_.n_fov; ++q) {
        if (q >= static_cast<int>(a.rendering.size()) || a.rendering[q] < 0) continue;
        const std::vector<int> hosts = detail::fov_hosts(a.serving, fovs, q);
        const int off = layout_.rendering_offset(q);
        const Vec p = masked_head_softmax(logits, off, hosts);
        for (std::size_t i = 0; i < hosts.size(); ++i) dlogits[off + hosts[i]] -= p[i];
        dlogits[off + a.rendering[q]] += 1.0;
      }
    }
  }

  double log_prob_from_logits(const Vec& logits, const ActionVector& a,
                              const std::vector<int>& fovs) const {
    double lp = 0.0;
    for (int k = 0; k < layout_.users; ++k) {
      const Vec p = head_softmax(logits, layout_.serving_offset(k), layout_.mecs);
      lp += std::log(std::max(p[a.serving[k]], 1e-300));
    }
    if (layout_.rendering) {
      for (int q = 0; q < layout_.n_fov; ++q) {
        if (q >= static_cast<int>(a.rendering.size()) || a.rendering[q] < 0) continue;
        const std::vector<int> hosts = detail::fov_hosts(a.serving, fovs, q);
        const Vec p = masked_head_softmax(logits, layout_.rendering_offset(q), hosts);
        for (std::size_t i = 0; i < hosts.size(); ++i)
          if (hosts[i] == a.rendering[q]) lp += std::log(std::max(p[i], 1e-300));
      }
    }
    return lp;
  }

  static Vec head_softmax(const Vec& logits, int offset, int width) {
    Vec slice(logits.begin() + offset, logits.begin() + offset + width);
    return softmax(slice);
  }

  static Vec masked_head_softmax(const Vec& logits, int offset, const std::vector<int>& hosts) {
    Vec slice;
    slice.reserve(hosts.size());
    for (int h : hosts) slice.push_back(logits[offset + h]);
    return softmax(slice);
  }

  static int sample_categorical(const Vec& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  HeadLayout layout_;
  AcConfig cfg_;
  Mlp actor_;
  Mlp critic_;
};

/// Samples from factorized-policy logits (e.g. one actor's output, or the
/// elementwise mean over distributed actors).
inline ActionVector sample_from_logits(const Vec& logits, const std::vector<int>& fovs,
                                       const HeadLayout& layout, Rng& rng) {
  ActionVector a;
  a.serving.resize(layout.users);
  for (int k = 0; k < layout.users; ++k) {
    const Vec p = AcAgent::head_softmax(logits, layout.serving_offset(k), layout.mecs);
    a.serving[k] = AcAgent::sample_categorical(p, rng);
  }
  if (layout.rendering) {
    a.rendering.assign(layout.n_fov, -1);
    for (int q = 0; q < layout.n_fov; ++q) {
      const std::vector<int> hosts = detail::fov_hosts(a.serving, fovs, q);
      if (hosts.empty()) continue;
      const Vec p = AcAgent::masked_head_softmax(logits, layout.rendering_offset(q), hosts);
      a.rendering[q] = hosts[AcAgent::sample_categorical(p, rng)];
    }
  }
  return a;
}

inline ActionVector AcAgent::sample_action(const Vec& encoded, const std::vector<int>& fovs,
                                           Rng& rng) const {
  return sample_from_logits(actor_.forward(encoded), fovs, layout_, rng);
}

/// One synchronization round of the distributed algorithms: every agent's
/// parameter set is reset to the central copy, local training runs, and the
/// new central copy is the elementwise mean of the results.
template <typename TrainFn>
inline ParameterSet distributed_round(std::vector<ParameterSet*> locals, const ParameterSet& central,
                                      TrainFn local_training) {
  for (ParameterSet* p : locals) {
    if (!p->same_shapes(central)) throw std::invalid_argument("distributed_round: shape mismatch");
    *p = central;
  }
  local_training();
  std::vector<const ParameterSet*> after(locals.begin(), locals.end());
  return average_parameters(after);
}

}  // namespace vrsim
