#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrsim/rng.hpp"

namespace vrsim {

using Vec = std::vector<double>;

struct Array {
  std::string name;
  std::vector<int> shape;
  Vec data;

  std::size_t size() const { return data.size(); }
};

inline std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

/// Named real-valued arrays with shapes. The flat view (flatten/unflatten)
/// round-trips losslessly and backs averaging and checkpointing.
struct ParameterSet {
  std::vector<Array> arrays;

  Array& add(const std::string& name, std::vector<int> shape) {
    arrays.push_back(Array{name, shape, Vec(shape_size(shape), 0.0)});
    return arrays.back();
  }

  Array& get(const std::string& name) {
    for (Array& a : arrays)
      if (a.name == name) return a;
    throw std::out_of_range("ParameterSet: no array named " + name);
  }
  const Array& get(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->get(name);
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const Array& a : arrays) n += a.size();
    return n;
  }

  Vec flatten() const {
    Vec out;
    out.reserve(total_size());
    for (const Array& a : arrays) out.insert(out.end(), a.data.begin(), a.data.end());
    return out;
  }

  void unflatten(const Vec& flat) {
    if (flat.size() != total_size()) throw std::invalid_argument("unflatten: size mismatch");
    std::size_t off = 0;
    for (Array& a : arrays) {
      std::copy(flat.begin() + off, flat.begin() + off + a.size(), a.data.begin());
      off += a.size();
    }
  }

  void fill(double v) {
    for (Array& a : arrays) std::fill(a.data.begin(), a.data.end(), v);
  }

  /// Zero-valued gradient holder with the same names and shapes.
  ParameterSet zeros_like() const {
    ParameterSet g;
    for (const Array& a : arrays) g.add(a.name, a.shape);
    return g;
  }

  bool same_shapes(const ParameterSet& o) const {
    if (arrays.size() != o.arrays.size()) return false;
    for (std::size_t i = 0; i < arrays.size(); ++i)
      if (arrays[i].name != o.arrays[i].name || arrays[i].shape != o.arrays[i].shape) return false;
    return true;
  }

  void save(const std::string& path) const;
  static ParameterSet load(const std::string& path);
};

/// theta <- theta - lr * grad, elementwise.
inline void sgd_step(ParameterSet& params, const ParameterSet& grads, double lr) {
  if (!params.same_shapes(grads)) throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < params.arrays.size(); ++i)
    for (std::size_t j = 0; j < params.arrays[i].data.size(); ++j)
      params.arrays[i].data[j] -= lr * grads.arrays[i].data[j];
}

/// theta <- theta + lr * grad (actor/critic ascent form).
inline void sgd_ascent(ParameterSet& params, const ParameterSet& grads, double lr) {
  sgd_step(params, grads, -lr);
}

inline void accumulate(ParameterSet& into, const ParameterSet& g, double scale = 1.0) {
  if (!into.same_shapes(g)) throw std::invalid_argument("accumulate: shape mismatch");
  for (std::size_t i = 0; i < into.arrays.size(); ++i)
    for (std::size_t j = 0; j < into.arrays[i].data.size(); ++j)
      into.arrays[i].data[j] += scale * g.arrays[i].data[j];
}

/// Elementwise arithmetic mean over identically shaped sets.
inline ParameterSet average_parameters(const std::vector<const ParameterSet*>& sets) {
  if (sets.empty()) throw std::invalid_argument("average_parameters: empty list");
  ParameterSet mean = sets.front()->zeros_like();
  for (const ParameterSet* s : sets) {
    if (!mean.same_shapes(*s)) throw std::invalid_argument("average_parameters: shape mismatch");
    accumulate(mean, *s);
  }
  const double inv = 1.0 / static_cast<double>(sets.size());
  for (Array& a : mean.arrays)
    for (double& v : a.data) v *= inv;
  return mean;
}

/// Uniform(-sqrt(6/(fan_in+fan_out))) init for 2D weights; biases stay zero.
inline void glorot_init(ParameterSet& params, Rng& rng) {
  for (Array& a : params.arrays) {
    if (a.shape.size() != 2) continue;
    const double bound = std::sqrt(6.0 / (a.shape[0] + a.shape[1]));
    for (double& v : a.data) v = rng.uniform(-bound, bound);
  }
}

// ---- checkpoint format ----------------------------------------------------
// byte 0: version (1)
// uint32 array count, then per array:
//   uint32 name length, name bytes,
//   uint32 ndim, int64 dims...,
//   float64 data (row-major).
// All integers and floats little-endian.

namespace detail {
template <typename T>
void write_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}
template <typename T>
T read_le(std::istream& in) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

inline void ParameterSet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ParameterSet::save: cannot open " + path);
  detail::write_le<std::uint8_t>(out, 1);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const Array& a : arrays) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) detail::write_le<std::int64_t>(out, d);
    for (double v : a.data) detail::write_le<double>(out, v);
  }
}

inline ParameterSet ParameterSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ParameterSet::load: cannot open " + path);
  const auto version = detail::read_le<std::uint8_t>(in);
  if (version != 1) throw std::runtime_error("ParameterSet::load: unsupported version");
  ParameterSet p;
  const auto count = detail::read_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nlen = detail::read_le<std::uint32_t>(in);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    const auto ndim = detail::read_le<std::uint32_t>(in);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(detail::read_le<std::int64_t>(in));
    Array& a = p.add(name, shape);
    for (double& v : a.data) v = detail::read_le<double>(in);
  }
  if (!in) throw std::runtime_error("ParameterSet::load: truncated file");
  return p;
}

// ---- dense algebra --------------------------------------------------------

// y = W x + b with W stored row-major (rows x cols).
inline void matvec(const Array& W, const Array& b, const Vec& x, Vec& y) {
  const int rows = W.shape[0], cols = W.shape[1];
  if (static_cast<int>(x.size()) != cols) throw std::invalid_argument("matvec: input shape mismatch");
  y.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    double s = b.data[r];
    const double* wr = W.data.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] = s;
  }
}

// gW += dy x^T, dx += W^T dy
inline void matvec_backward_w(const Array& W, const Vec& x, const Vec& dy, Array& gW, Vec* dx) {
  const int rows = W.shape[0], cols = W.shape[1];
  for (int r = 0; r < rows; ++r) {
    const double d = dy[r];
    double* gr = gW.data.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) gr[c] += d * x[c];
  }
  if (dx != nullptr) {
    if (dx->size() != static_cast<std::size_t>(cols)) dx->assign(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double d = dy[r];
      const double* wr = W.data.data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) (*dx)[c] += d * wr[c];
    }
  }
}

// gW += dy x^T, gb += dy, dx += W^T dy
inline void matvec_backward(const Array& W, const Vec& x, const Vec& dy, Array& gW, Array& gb,
                            Vec* dx) {
  for (std::size_t r = 0; r < dy.size(); ++r) gb.data[r] += dy[r];
  matvec_backward_w(W, x, dy, gW, dx);
}

inline Vec softmax(const Vec& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---- MLP ------------------------------------------------------------------

/// Fully connected network: ReLU hidden layers, linear output.
struct Mlp {
  std::vector<int> sizes;  // input, hidden..., output
  ParameterSet params;

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes) : sizes(std::move(layer_sizes)) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      params.add("W" + std::to_string(l), {sizes[l + 1], sizes[l]});
      params.add("b" + std::to_string(l), {sizes[l + 1]});
    }
  }

  void init(Rng& rng) { glorot_init(params, rng); }

  struct Cache {
    Vec input;
    std::vector<Vec> pre;  // pre-activation per layer
    std::vector<Vec> act;  // post-activation per hidden layer
  };

  Vec forward(const Vec& x, Cache* cache = nullptr) const {
    const std::size_t layers = sizes.size() - 1;
    if (cache != nullptr) {
      cache->input = x;
      cache->pre.assign(layers, {});
      cache->act.assign(layers, {});
    }
    Vec cur = x;
    for (std::size_t l = 0; l < layers; ++l) {
      Vec y;
      matvec(params.get("W" + std::to_string(l)), params.get("b" + std::to_string(l)), cur, y);
      if (cache != nullptr) cache->pre[l] = y;
      if (l + 1 < layers)
        for (double& v : y) v = std::max(0.0, v);
      if (cache != nullptr) cache->act[l] = y;
      cur = std::move(y);
    }
    return cur;
  }

  /// Exact gradients wrt all parameters for the cached forward pass.
  ParameterSet backward(const Cache& cache, const Vec& d_output, Vec* d_input = nullptr) const {
    if (cache.pre.empty()) throw std::invalid_argument("Mlp::backward: missing cache");
    const std::size_t layers = sizes.size() - 1;
    ParameterSet grads = params.zeros_like();
    Vec dy = d_output;
    for (std::size_t l = layers; l-- > 0;) {
      if (l + 1 < layers)  // ReLU derivative at this layer's output
        for (std::size_t i = 0; i < dy.size(); ++i)
          if (cache.pre[l][i] <= 0.0) dy[i] = 0.0;
      const Vec& x = (l == 0) ? cache.input : cache.act[l - 1];
      Vec dx;
      matvec_backward(params.get("W" + std::to_string(l)), x, dy,
                      grads.get("W" + std::to_string(l)), grads.get("b" + std::to_string(l)),
                      (l > 0 || d_input != nullptr) ? &dx : nullptr);
      if (l == 0 && d_input != nullptr) *d_input = dx;
      dy = std::move(dx);
    }
    return grads;
  }
};

// ---- GRU ------------------------------------------------------------------

/// Single GRU cell:
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br)
///   c = tanh(Wh x + Uh (r.h) + bh), h' = (1-z).h + z.c
struct GruCell {
  int input = 0;
  int hidden = 0;
  ParameterSet params;

  GruCell() = default;
  GruCell(int input_size, int hidden_size) : input(input_size), hidden(hidden_size) {
    for (const char* g : {"z", "r", "h"}) {
      params.add(std::string("W") + g, {hidden, input});
      params.add(std::string("U") + g, {hidden, hidden});
      params.add(std::string("b") + g, {hidden});
    }
  }

  void init(Rng& rng) { glorot_init(params, rng); }

  struct StepCache {
    Vec x, h_prev, z, r, c, rh;
  };

  Vec step(const Vec& x, const Vec& h_prev, StepCache* cache = nullptr) const {
    if (static_cast<int>(x.size()) != input || static_cast<int>(h_prev.size()) != hidden)
      throw std::invalid_argument("GruCell::step: shape mismatch");
    Vec zx, zh, rx, rhv, cx, ch;
    matvec(params.get("Wz"), params.get("bz"), x, zx);
    gate_hh(params.get("Uz"), h_prev, zx);
    matvec(params.get("Wr"), params.get("br"), x, rx);
    gate_hh(params.get("Ur"), h_prev, rx);
    Vec z(hidden), r(hidden);
    for (int i = 0; i < hidden; ++i) z[i] = sigmoid(zx[i]);
    for (int i = 0; i < hidden; ++i) r[i] = sigmoid(rx[i]);
    Vec rh(hidden);
    for (int i = 0; i < hidden; ++i) rh[i] = r[i] * h_prev[i];
    matvec(params.get("Wh"), params.get("bh"), x, cx);
    gate_hh(params.get("Uh"), rh, cx);
    Vec c(hidden), h(hidden);
    for (int i = 0; i < hidden; ++i) c[i] = std::tanh(cx[i]);
    for (int i = 0; i < hidden; ++i) h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * c[i];
    if (cache != nullptr) *cache = StepCache{x, h_prev, z, r, c, rh};
    return h;
  }

  /// BPTT through one step. Accumulates parameter gradients into `grads`
  /// and returns the gradient wrt the previous hidden state.
  Vec step_backward(const StepCache& s, const Vec& dh, ParameterSet& grads) const {
    Vec dz(hidden), dc(hidden), dh_prev(hidden);
    for (int i = 0; i < hidden; ++i) {
      dz[i] = dh[i] * (s.c[i] - s.h_prev[i]);
      dc[i] = dh[i] * s.z[i];
      dh_prev[i] = dh[i] * (1.0 - s.z[i]);
    }
    // candidate: cx = Wh x + Uh (r.h) + bh, c = tanh(cx)
    Vec dcx(hidden);
    for (int i = 0; i < hidden; ++i) dcx[i] = dc[i] * (1.0 - s.c[i] * s.c[i]);
    Vec drh;
    matvec_backward(params.get("Wh"), s.x, dcx, grads.get("Wh"), grads.get("bh"), nullptr);
    matvec_backward_w(params.get("Uh"), s.rh, dcx, grads.get("Uh"), &drh);
    Vec dr(hidden);
    for (int i = 0; i < hidden; ++i) {
      dr[i] = drh[i] * s.h_prev[i];
      dh_prev[i] += drh[i] * s.r[i];
    }
    // reset gate: rx = Wr x + Ur h + br, r = sig(rx)
    Vec drx(hidden);
    for (int i = 0; i < hidden; ++i) drx[i] = dr[i] * s.r[i] * (1.0 - s.r[i]);
    Vec dh_r;
    matvec_backward(params.get("Wr"), s.x, drx, grads.get("Wr"), grads.get("br"), nullptr);
    matvec_backward_w(params.get("Ur"), s.h_prev, drx, grads.get("Ur"), &dh_r);
    for (int i = 0; i < hidden; ++i) dh_prev[i] += dh_r[i];
    // update gate: zx = Wz x + Uz h + bz, z = sig(zx)
    Vec dzx(hidden);
    for (int i = 0; i < hidden; ++i) dzx[i] = dz[i] * s.z[i] * (1.0 - s.z[i]);
    Vec dh_z;
    matvec_backward(params.get("Wz"), s.x, dzx, grads.get("Wz"), grads.get("bz"), nullptr);
    matvec_backward_w(params.get("Uz"), s.h_prev, dzx, grads.get("Uz"), &dh_z);
    for (int i = 0; i < hidden; ++i) dh_prev[i] += dh_z[i];
    return dh_prev;
  }

 private:
  static void gate_hh(const Array& U, const Vec& h, Vec& acc) {
    const int rows = U.shape[0], cols = U.shape[1];
    for (int r = 0; r < rows; ++r) {
      const double* ur = U.data.data() + static_cast<std::size_t>(r) * cols;
      double sum = 0.0;
      for (int c = 0; c < cols; ++c) sum += ur[c] * h[c];
      acc[r] += sum;
    }
  }
};

}  // namespace vrsim
