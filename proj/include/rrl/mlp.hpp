#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrl/matrix.hpp"
#include "rrl/rng.hpp"

namespace rrl {

enum class Act : uint32_t { Identity = 0, Relu = 1, Tanh = 2, Sigmoid = 3, Swish = 4 };

// Stable sigmoid pinned to the open interval (0,1): saturated values
// clamp to the nearest representable neighbors of the endpoints.
inline double stable_sigmoid(double z) {
  const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  constexpr double lo = 1e-300;
  constexpr double hi = 1.0 - 1.1102230246251565e-16;  // nextafter(1, 0)
  return s < lo ? lo : (s > hi ? hi : s);
}

inline double act_eval(Act f, double z) {
  switch (f) {
    case Act::Identity: return z;
    case Act::Relu: return z > 0.0 ? z : 0.0;
    case Act::Tanh: return std::tanh(z);
    case Act::Sigmoid: return stable_sigmoid(z);
    case Act::Swish: return z / (1.0 + std::exp(-z));
  }
  return z;
}

// Derivative in terms of pre-activation z and activation a = f(z).
inline double act_deriv(Act f, double z, double a) {
  switch (f) {
    case Act::Identity: return 1.0;
    case Act::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Act::Tanh: return 1.0 - a * a;
    case Act::Sigmoid: return a * (1.0 - a);
    case Act::Swish: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s + a * (1.0 - s);
    }
  }
  return 1.0;
}

// Plain fully connected net. Hidden activation applies to every layer
// except the last, which gets output_act. Value semantics throughout.
// An optional fixed input map x -> (x + in_shift) * in_scale conditions
// raw-coordinate inputs; it is not a trainable parameter.
struct Mlp {
  std::vector<int> dims;  // widths, input first
  Act hidden_act = Act::Relu;
  Act output_act = Act::Identity;
  std::vector<Matrix> w;  // w[l] has shape dims[l+1] x dims[l]
  std::vector<std::vector<double>> b;
  std::vector<double> in_shift, in_scale;  // empty = identity map

  Mlp() = default;
  Mlp(std::vector<int> dims_, Act hidden, Act output)
      : dims(std::move(dims_)), hidden_act(hidden), output_act(output) {
    if (dims.size() < 2) throw std::invalid_argument("mlp: need at least one layer");
    for (int d : dims)
      if (d < 1) throw std::invalid_argument("mlp: nonpositive width");
    const size_t L = dims.size() - 1;
    w.resize(L);
    b.resize(L);
    for (size_t l = 0; l < L; ++l) {
      w[l].resize(dims[l + 1], dims[l]);
      b[l].assign(dims[l + 1], 0.0);
    }
  }

  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
  size_t layer_count() const { return w.size(); }
  Act act_at(size_t l) const { return l + 1 == w.size() ? output_act : hidden_act; }

  void set_input_norm(std::vector<double> shift, std::vector<double> scale) {
    if (shift.size() != static_cast<size_t>(in_dim()) ||
        scale.size() != static_cast<size_t>(in_dim()))
      throw std::invalid_argument("mlp: input norm size mismatch");
    for (double s : scale)
      if (s == 0.0) throw std::invalid_argument("mlp: zero input scale");
    in_shift = std::move(shift);
    in_scale = std::move(scale);
  }

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
  // Draw order is fixed (layer by layer, row major) for determinism.
  void init(Rng& rng) {
    for (size_t l = 0; l < w.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
      for (double& v : w[l].a) v = rng.uniform(-bound, bound);
      std::fill(b[l].begin(), b[l].end(), 0.0);
    }
  }

  size_t param_count() const {
    size_t n = 0;
    for (size_t l = 0; l < w.size(); ++l) n += w[l].a.size() + b[l].size();
    return n;
  }
};

struct MlpCache {
  Matrix in;
  std::vector<Matrix> z, a;  // pre and post activations per layer
};

struct MlpGrads {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;
  Matrix d0, d1;  // backprop scratch, not part of the gradient payload

  void match(const Mlp& net) {
    dw.resize(net.layer_count());
    db.resize(net.layer_count());
    for (size_t l = 0; l < net.layer_count(); ++l) {
      dw[l].resize(net.dims[l + 1], net.dims[l]);
      db[l].assign(static_cast<size_t>(net.dims[l + 1]), 0.0);
    }
  }
  void zero() {
    for (auto& m : dw) m.zero();
    for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
  }
};

// Batched forward pass. Rows of x are samples.
inline void forward(const Mlp& net, const Matrix& x, MlpCache& c) {
  if (x.cols != net.in_dim()) throw std::invalid_argument("forward: input width mismatch");
  const size_t L = net.layer_count();
  c.in.reshape(x.rows, x.cols);
  if (net.in_scale.empty()) {
    c.in.a.assign(x.a.begin(), x.a.end());
  } else {
    // cache holds normalized inputs so weight gradients see them directly
    for (int i = 0; i < x.rows; ++i) {
      const double* xi = x.row(i);
      double* ci = c.in.row(i);
      for (int j = 0; j < x.cols; ++j) ci[j] = (xi[j] + net.in_shift[j]) * net.in_scale[j];
    }
  }
  c.z.resize(L);
  c.a.resize(L);
  const Matrix* cur = &c.in;
  for (size_t l = 0; l < L; ++l) {
    matmul_nt(*cur, net.w[l], c.z[l]);
    const Act f = net.act_at(l);
    c.a[l].reshape(c.z[l].rows, c.z[l].cols);
    const double* bl = net.b[l].data();
    for (int i = 0; i < c.z[l].rows; ++i) {
      double* zi = c.z[l].row(i);
      double* ai = c.a[l].row(i);
      for (int j = 0; j < c.z[l].cols; ++j) {
        zi[j] += bl[j];
        ai[j] = act_eval(f, zi[j]);
      }
    }
    cur = &c.a[l];
  }
}

inline const Matrix& output_of(const MlpCache& c) { return c.a.back(); }

// Single-sample convenience.
inline std::vector<double> forward1(const Mlp& net, const std::vector<double>& x) {
  Matrix m(1, static_cast<int>(x.size()));
  for (size_t j = 0; j < x.size(); ++j) m(0, static_cast<int>(j)) = x[j];
  MlpCache c;
  forward(net, m, c);
  const Matrix& y = output_of(c);
  return std::vector<double>(y.a.begin(), y.a.end());
}

// Reverse pass over the cache of the matching forward call. dy is the
// loss gradient wrt the post-activation output, any batch scaling
// already applied by the caller. Accumulates into g (caller zeroes).
// If dx is non-null it receives the gradient wrt the input batch.
inline void backward(const Mlp& net, const MlpCache& c, const Matrix& dy, MlpGrads& g,
                     Matrix* dx = nullptr) {
  const size_t L = net.layer_count();
  if (dy.rows != c.a.back().rows || dy.cols != c.a.back().cols)
    throw std::invalid_argument("backward: dy shape mismatch");
  Matrix* delta = &g.d0;
  Matrix* prev = &g.d1;

  delta->reshape(dy.rows, dy.cols);
  {
    const Act f = net.act_at(L - 1);
    for (int i = 0; i < dy.rows; ++i) {
      const double* dyi = dy.row(i);
      const double* zi = c.z[L - 1].row(i);
      const double* ai = c.a[L - 1].row(i);
      double* di = delta->row(i);
      for (int j = 0; j < dy.cols; ++j) di[j] = dyi[j] * act_deriv(f, zi[j], ai[j]);
    }
  }

  for (size_t li = L; li-- > 0;) {
    const Matrix& layer_in = li == 0 ? c.in : c.a[li - 1];
    matmul_tn_acc(*delta, layer_in, g.dw[li]);
    double* dbl = g.db[li].data();
    for (int i = 0; i < delta->rows; ++i) {
      const double* di = delta->row(i);
      for (int j = 0; j < delta->cols; ++j) dbl[j] += di[j];
    }
    const bool need_input_grad = li > 0 || dx != nullptr;
    if (!need_input_grad) continue;
    matmul_nn(*delta, net.w[li], *prev);
    if (li == 0) {
      if (dx) {
        dx->reshape(prev->rows, prev->cols);
        if (net.in_scale.empty()) {
          dx->a.assign(prev->a.begin(), prev->a.end());
        } else {
          // chain through the input map: gradients are wrt raw inputs
          for (int i = 0; i < prev->rows; ++i) {
            const double* pi = prev->row(i);
            double* di = dx->row(i);
            for (int j = 0; j < prev->cols; ++j) di[j] = pi[j] * net.in_scale[j];
          }
        }
      }
      break;
    }
    const Act f = net.act_at(li - 1);
    for (int i = 0; i < prev->rows; ++i) {
      double* pi = prev->row(i);
      const double* zi = c.z[li - 1].row(i);
      const double* ai = c.a[li - 1].row(i);
      for (int j = 0; j < prev->cols; ++j) pi[j] *= act_deriv(f, zi[j], ai[j]);
    }
    std::swap(delta, prev);
  }
}

}  // namespace rrl
