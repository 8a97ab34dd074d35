#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gale/rng.hpp"
#include "gale/tensor.hpp"

namespace gale {

// ---------------------------------------------------------------------------
// Parameter blocks.  Gradients and Adam moments reuse the same structs; every
// block exposes visit(prefix, f) so optimizers, checkpoints and gradient
// checks can walk named tensors in a stable order.
// ---------------------------------------------------------------------------

template <typename T = double>
struct AffineP {
  Tensor<T> w;  // in x out
  Tensor<T> b;  // 1 x out

  void resize(int in, int out) {
    w = Tensor<T>(in, out);
    b = Tensor<T>(1, out);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w", w);
    f(prefix + ".b", b);
  }
};

template <typename T = double>
struct LayerNormP {
  Tensor<T> gamma;  // 1 x d
  Tensor<T> beta;   // 1 x d

  void resize(int d) {
    gamma = Tensor<T>(1, d);
    beta = Tensor<T>(1, d);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }
};

struct MlpSpec {
  int in_dim{0};
  int hidden_dim{0};
  int out_dim{0};
  bool final_norm{false};
  // hidden_layers is fixed at 2 throughout.
};

template <typename T = double>
struct MlpP {
  AffineP<T> a1, a2, a3;
  LayerNormP<T> norm;
  bool has_norm{false};

  void resize(const MlpSpec& s) {
    a1.resize(s.in_dim, s.hidden_dim);
    a2.resize(s.hidden_dim, s.hidden_dim);
    a3.resize(s.hidden_dim, s.out_dim);
    has_norm = s.final_norm;
    if (has_norm) norm.resize(s.out_dim);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    a1.visit(prefix + ".a1", f);
    a2.visit(prefix + ".a2", f);
    a3.visit(prefix + ".a3", f);
    if (has_norm) norm.visit(prefix + ".norm", f);
  }
};

// ---------------------------------------------------------------------------
// Initialization: He-uniform fan-in for weights, zero biases, identity norm.
// ---------------------------------------------------------------------------

template <typename T>
void init_affine(AffineP<T>& a, Rng& rng) {
  double limit = std::sqrt(6.0 / a.w.rows());
  for (size_t i = 0; i < a.w.size(); ++i) a.w.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
  a.b.set_zero();
}

template <typename T>
void init_layer_norm(LayerNormP<T>& n) {
  n.gamma.fill(T(1));
  n.beta.set_zero();
}

template <typename T>
void init_mlp(MlpP<T>& m, Rng& rng) {
  init_affine(m.a1, rng);
  init_affine(m.a2, rng);
  init_affine(m.a3, rng);
  if (m.has_norm) init_layer_norm(m.norm);
}

// ---------------------------------------------------------------------------
// Primitive forward/backward rules
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> affine_forward(const AffineP<T>& p, const Tensor<T>& x) {
  Tensor<T> y = matmul(x, p.w);
  for (int i = 0; i < y.rows(); ++i) {
    T* row = y.row(i);
    for (int j = 0; j < y.cols(); ++j) row[j] += p.b(0, j);
  }
  return y;
}

/// Accumulates weight/bias gradients and returns dX.  `x` is the forward input.
template <typename T>
Tensor<T> affine_backward(const AffineP<T>& p, const Tensor<T>& x, const Tensor<T>& dy,
                          AffineP<T>& grads) {
  matmul_tn_acc(x, dy, grads.w);
  for (int i = 0; i < dy.rows(); ++i)
    for (int j = 0; j < dy.cols(); ++j) grads.b(0, j) += dy(i, j);
  return matmul_nt(dy, p.w);
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (size_t i = 0; i < x.size(); ++i)
    if (x.data()[i] < T(0)) x.data()[i] = T(0);
}

/// dX for y = relu(x), given dY and the post-activation y.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (size_t i = 0; i < dx.size(); ++i)
    if (y.data()[i] <= T(0)) dx.data()[i] = T(0);
  return dx;
}

constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct LayerNormCache {
  Tensor<T> xhat;     // n x d
  Tensor<T> inv_std;  // n x 1
  int tensor_count() const { return 2; }
};

/// Per-row standardization followed by scale/shift.
template <typename T>
Tensor<T> layer_norm_forward(const LayerNormP<T>& p, const Tensor<T>& x, LayerNormCache<T>* cache) {
  if (x.cols() == 0) throw ShapeError("layer_norm on zero-width input");
  const int n = x.rows(), d = x.cols();
  Tensor<T> y(n, d);
  Tensor<T> xhat(n, d);
  Tensor<T> inv(n, 1);
  for (int i = 0; i < n; ++i) {
    const T* row = x.row(i);
    T mean = T(0);
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= T(d);
    T var = T(0);
    for (int j = 0; j < d; ++j) {
      T c = row[j] - mean;
      var += c * c;
    }
    var /= T(d);
    T istd = T(1) / std::sqrt(var + T(kLayerNormEps));
    inv(i, 0) = istd;
    T* xr = xhat.row(i);
    T* yr = y.row(i);
    for (int j = 0; j < d; ++j) {
      xr[j] = (row[j] - mean) * istd;
      yr[j] = p.gamma(0, j) * xr[j] + p.beta(0, j);
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm_backward(const LayerNormP<T>& p, const LayerNormCache<T>& cache,
                              const Tensor<T>& dy, LayerNormP<T>& grads) {
  const int n = dy.rows(), d = dy.cols();
  Tensor<T> dx(n, d);
  for (int i = 0; i < n; ++i) {
    const T* dyr = dy.row(i);
    const T* xr = cache.xhat.row(i);
    T istd = cache.inv_std(i, 0);
    T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
    for (int j = 0; j < d; ++j) {
      T dxhat = dyr[j] * p.gamma(0, j);
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xr[j];
      grads.gamma(0, j) += dyr[j] * xr[j];
      grads.beta(0, j) += dyr[j];
    }
    T m1 = sum_dxhat / T(d);
    T m2 = sum_dxhat_xhat / T(d);
    T* dxr = dx.row(i);
    for (int j = 0; j < d; ++j) {
      T dxhat = dyr[j] * p.gamma(0, j);
      dxr[j] = istd * (dxhat - m1 - xr[j] * m2);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Two-hidden-layer ReLU MLP
// ---------------------------------------------------------------------------

template <typename T>
struct MlpCache {
  Tensor<T> x;   // forward input
  Tensor<T> h1;  // post-relu
  Tensor<T> h2;  // post-relu
  LayerNormCache<T> ln;
  bool has_norm{false};
  int tensor_count() const { return 3 + (has_norm ? ln.tensor_count() : 0); }
};

template <typename T>
Tensor<T> mlp_forward(const MlpP<T>& p, const Tensor<T>& x, MlpCache<T>* cache) {
  if (x.cols() != p.a1.w.rows()) throw ShapeError("mlp_forward: input width mismatch");
  Tensor<T> h1 = affine_forward(p.a1, x);
  relu_inplace(h1);
  Tensor<T> h2 = affine_forward(p.a2, h1);
  relu_inplace(h2);
  Tensor<T> y = affine_forward(p.a3, h2);
  if (p.has_norm) y = layer_norm_forward(p.norm, y, cache ? &cache->ln : nullptr);
  if (cache) {
    cache->x = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->has_norm = p.has_norm;
  }
  return y;
}

template <typename T>
Tensor<T> mlp_backward(const MlpP<T>& p, const MlpCache<T>& cache, const Tensor<T>& dy,
                       MlpP<T>& grads) {
  Tensor<T> d = dy;
  if (p.has_norm) d = layer_norm_backward(p.norm, cache.ln, d, grads.norm);
  Tensor<T> dh2 = affine_backward(p.a3, cache.h2, d, grads.a3);
  dh2 = relu_backward(cache.h2, dh2);
  Tensor<T> dh1 = affine_backward(p.a2, cache.h1, dh2, grads.a2);
  dh1 = relu_backward(cache.h1, dh1);
  return affine_backward(p.a1, cache.x, dh1, grads.a1);
}

// ---------------------------------------------------------------------------
// Parameter registry: stable, named iteration over every trainable tensor.
// ---------------------------------------------------------------------------

struct ParamRef {
  std::string name;
  Tensor<double>* value;
  Tensor<double>* grad;
};

using ParamRegistry = std::vector<ParamRef>;

inline size_t total_param_count(const ParamRegistry& reg) {
  size_t n = 0;
  for (const auto& p : reg) n += p.value->size();
  return n;
}

inline void zero_grads(const ParamRegistry& reg) {
  for (const auto& p : reg) p.grad->set_zero();
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

class Adam {
 public:
  explicit Adam(const ParamRegistry& reg, AdamConfig cfg = {}) : cfg_(cfg) {
    m_.reserve(reg.size());
    v_.reserve(reg.size());
    for (const auto& p : reg) {
      m_.emplace_back(p.value->rows(), p.value->cols());
      v_.emplace_back(p.value->rows(), p.value->cols());
    }
  }

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  std::vector<Tensor<double>>& moments1() { return m_; }
  std::vector<Tensor<double>>& moments2() { return v_; }
  void set_step(int64_t s) { step_ = s; }

  /// One bias-corrected Adam update at the given live learning rate.
  void step(const ParamRegistry& reg, double lr_now) {
    if (reg.size() != m_.size()) throw ShapeError("adam: registry size changed");
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t b = 0; b < reg.size(); ++b) {
      Tensor<double>& val = *reg[b].value;
      Tensor<double>& g = *reg[b].grad;
      if (!g.all_finite()) throw NumericError("non-finite gradient in block '" + reg[b].name + "'");
      Tensor<double>& m = m_[b];
      Tensor<double>& v = v_[b];
      for (size_t i = 0; i < val.size(); ++i) {
        double gi = g.data()[i];
        m.data()[i] = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * gi;
        v.data()[i] = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * gi * gi;
        double mhat = m.data()[i] / bc1;
        double vhat = v.data()[i] / bc2;
        val.data()[i] -= lr_now * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  int64_t step_{0};
  std::vector<Tensor<double>> m_, v_;
};

/// Exponentially decayed learning rate: base * decay^epoch.
inline double decayed_lr(double base_lr, double decay, int epoch) {
  return base_lr * std::pow(decay, static_cast<double>(epoch));
}

}  // namespace gale
