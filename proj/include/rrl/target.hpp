#pragma once
#include <stdexcept>

#include "rrl/mlp.hpp"

namespace rrl {

// target <- (1 - tau) * target + tau * live, elementwise.
inline void polyak_update(Mlp& target, const Mlp& live, double tau) {
  if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("polyak_update: tau outside (0,1]");
  if (target.dims != live.dims) throw std::invalid_argument("polyak_update: shape mismatch");
  for (size_t l = 0; l < live.layer_count(); ++l) {
    const size_t nw = live.w[l].a.size();
    for (size_t i = 0; i < nw; ++i)
      target.w[l].a[i] = (1.0 - tau) * target.w[l].a[i] + tau * live.w[l].a[i];
    for (size_t i = 0; i < live.b[l].size(); ++i)
      target.b[l][i] = (1.0 - tau) * target.b[l][i] + tau * live.b[l][i];
  }
}

// A live net plus its slowly tracking copy.
struct TargetPair {
  Mlp live, target;
  double tau = 0.005;

  TargetPair() = default;
  explicit TargetPair(Mlp net, double tau_ = 0.005)
      : live(std::move(net)), target(live), tau(tau_) {
    if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("TargetPair: tau outside (0,1]");
  }
  void polyak() { polyak_update(target, live, tau); }
  void hard_sync() { target = live; }
};

}  // namespace rrl
