#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rrl/mlp.hpp"

namespace rrl {

// Standard bias-corrected Adam over one net's parameters.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<Matrix> mw, vw;
  std::vector<std::vector<double>> mb, vb;

  explicit AdamState(double lr_ = 3e-4) : lr(lr_) {}

  void match(const Mlp& net) {
    mw.resize(net.layer_count());
    vw.resize(net.layer_count());
    mb.resize(net.layer_count());
    vb.resize(net.layer_count());
    for (size_t l = 0; l < net.layer_count(); ++l) {
      mw[l].resize(net.dims[l + 1], net.dims[l]);
      vw[l].resize(net.dims[l + 1], net.dims[l]);
      mb[l].assign(static_cast<size_t>(net.dims[l + 1]), 0.0);
      vb[l].assign(static_cast<size_t>(net.dims[l + 1]), 0.0);
    }
    t = 0;
  }
  bool matches(const Mlp& net) const {
    if (mw.size() != net.layer_count()) return false;
    for (size_t l = 0; l < net.layer_count(); ++l)
      if (mw[l].rows != net.dims[l + 1] || mw[l].cols != net.dims[l]) return false;
    return true;
  }
};

namespace detail {
inline void adam_apply(double* p, const double* g, double* m, double* v, size_t n,
                       const AdamState& s, double c1, double c2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    p[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}
}  // namespace detail

inline void adam_step(Mlp& net, const MlpGrads& g, AdamState& s) {
  if (!s.matches(net)) throw std::invalid_argument("adam_step: state/net shape mismatch");
  if (g.dw.size() != net.layer_count()) throw std::invalid_argument("adam_step: grad shape mismatch");
  for (size_t l = 0; l < net.layer_count(); ++l)
    if (!g.dw[l].same_shape(net.w[l]) || g.db[l].size() != net.b[l].size())
      throw std::invalid_argument("adam_step: grad shape mismatch");
  s.t += 1;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (size_t l = 0; l < net.layer_count(); ++l) {
    detail::adam_apply(net.w[l].a.data(), g.dw[l].a.data(), s.mw[l].a.data(), s.vw[l].a.data(),
                       net.w[l].a.size(), s, c1, c2);
    detail::adam_apply(net.b[l].data(), g.db[l].data(), s.mb[l].data(), s.vb[l].data(),
                       net.b[l].size(), s, c1, c2);
  }
}

}  // namespace rrl
