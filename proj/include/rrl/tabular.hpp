#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rrl/rng.hpp"

namespace rrl {

// Small finite CMDP used as an exact oracle for the risk critic.
// c marks violating states; those must be absorbing self-loops.
struct TabularCmdp {
  int ns = 0, na = 0;
  std::vector<double> P;   // ns*na*ns, P[(s*na+a)*ns + s']
  std::vector<double> c;   // per state, 0 or 1
  std::vector<double> pi;  // ns*na, action distribution per state
  double gamma = 0.9;

  double p(int s, int a, int sn) const { return P[(static_cast<size_t>(s) * na + a) * ns + sn]; }

  void validate() const {
    if (ns < 1 || na < 1) throw std::invalid_argument("tabular: empty state or action set");
    if (P.size() != static_cast<size_t>(ns) * na * ns || c.size() != static_cast<size_t>(ns) ||
        pi.size() != static_cast<size_t>(ns) * na)
      throw std::invalid_argument("tabular: tensor shapes disagree");
    for (int s = 0; s < ns; ++s) {
      if (c[s] != 0.0 && c[s] != 1.0) throw std::invalid_argument("tabular: c must be 0 or 1");
      double pr = 0.0;
      for (int a = 0; a < na; ++a) pr += pi[static_cast<size_t>(s) * na + a];
      if (std::abs(pr - 1.0) > 1e-9) throw std::invalid_argument("tabular: policy row not stochastic");
      for (int a = 0; a < na; ++a) {
        double row = 0.0;
        for (int sn = 0; sn < ns; ++sn) row += p(s, a, sn);
        if (std::abs(row - 1.0) > 1e-9)
          throw std::invalid_argument("tabular: transition row not stochastic");
        if (c[s] == 1.0 && std::abs(p(s, a, s) - 1.0) > 1e-9)
          throw std::invalid_argument("tabular: violating state must be absorbing");
      }
    }
  }
};

// Exact risk values by value iteration from zero, under the arrival
// cost convention: Q(s,a) = sum_s' P [c(s') + (1-c(s')) g V(s')].
// Zero initialization selects the minimal fixed point, which at
// gamma = 1 equals the total violation probability.
inline std::vector<double> oracle_qrisk(const TabularCmdp& m, double tol = 1e-10,
                                        long max_iters = 2000000) {
  m.validate();
  std::vector<double> q(static_cast<size_t>(m.ns) * m.na, 0.0), v(m.ns, 0.0);
  for (long it = 0; it < max_iters; ++it) {
    for (int s = 0; s < m.ns; ++s) {
      double vs = 0.0;
      for (int a = 0; a < m.na; ++a) vs += m.pi[static_cast<size_t>(s) * m.na + a] * q[static_cast<size_t>(s) * m.na + a];
      v[s] = vs;
    }
    double delta = 0.0;
    for (int s = 0; s < m.ns; ++s) {
      for (int a = 0; a < m.na; ++a) {
        double acc = 0.0;
        for (int sn = 0; sn < m.ns; ++sn) {
          const double pr = m.p(s, a, sn);
          if (pr == 0.0) continue;
          acc += pr * (m.c[sn] + (1.0 - m.c[sn]) * m.gamma * v[sn]);
        }
        double& slot = q[static_cast<size_t>(s) * m.na + a];
        delta = std::max(delta, std::abs(acc - slot));
        slot = acc;
      }
    }
    if (delta < tol) return q;
  }
  throw std::runtime_error("oracle_qrisk: value iteration did not converge");
}

// Monte Carlo estimate of the discounted violation probability from
// (s, a), following pi afterwards. Terminates on violation.
inline double rollout_qrisk(const TabularCmdp& m, int s0, int a0, int rollouts, int max_len,
                            Rng& rng) {
  auto draw = [&](const double* dist, int n) {
    double u = rng.uniform(), acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += dist[i];
      if (u < acc) return i;
    }
    return n - 1;
  };
  double total = 0.0;
  for (int k = 0; k < rollouts; ++k) {
    int s = s0, a = a0;
    double discount = 1.0;
    for (int t = 0; t < max_len; ++t) {
      const int sn = draw(&m.P[(static_cast<size_t>(s) * m.na + a) * m.ns], m.ns);
      if (m.c[sn] == 1.0) {
        total += discount;
        break;
      }
      discount *= m.gamma;
      s = sn;
      a = draw(&m.pi[static_cast<size_t>(s) * m.na], m.na);
    }
  }
  return total / rollouts;
}

}  // namespace rrl
