#include <cstdio>
#include <tuple>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main(int argc, char** argv) {
  const double noise = argc > 1 ? std::atof(argv[1]) : 0.3;
  const int steps = argc > 2 ? std::atoi(argv[2]) : 2000;
  NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, noise);
  ReplayBuffer buf;
  for (const Transition& t : data.rows) buf.push(t);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  std::tie(ccfg.state_shift, ccfg.state_scale) = workspace_norm(cfg);
  SafetyCritic critic(ccfg, Rng(81));
  MfRecoveryConfig rcfg;
  std::tie(rcfg.state_shift, rcfg.state_scale) = workspace_norm(cfg);
  ModelFreeRecovery rec(rcfg, Rng(82));
  Rng train(83);
  pretrain_mf_recovery(critic, rec, buf, steps, 1000, train);

  // q under the zero action along a vertical line crossing slab 1 at x=-27,
  // and along a horizontal line crossing both faces at y=5.
  std::printf("vertical x=-27 (slab1 y in [1.5,9]):\n");
  for (double y = 12.0; y >= 0.0; y -= 1.0)
    std::printf("  y %5.1f q0 %.3f q(+y) %.3f q(-y) %.3f\n", y,
                critic.qrisk({-27.0, y}, {0, 0}), critic.qrisk({-27.0, y}, {0, 1}),
                critic.qrisk({-27.0, y}, {0, -1}));
  std::printf("horizontal y=5 (slab1 x in [-32,-22]):\n");
  for (double x = -36.0; x <= -18.0; x += 1.5)
    std::printf("  x %5.1f q0 %.3f q(+x) %.3f q(-x) %.3f\n", x, critic.qrisk({x, 5.0}, {0, 0}),
                critic.qrisk({x, 5.0}, {1, 0}), critic.qrisk({x, 5.0}, {-1, 0}));

  // Mean critic MSE on a fresh batch as a training health check.
  const auto batch = buf.sample(1000, train);
  Matrix ns(1000, 2), na;
  for (int i = 0; i < 1000; ++i) {
    ns(i, 0) = batch[i]->sn[0];
    ns(i, 1) = batch[i]->sn[1];
  }
  rec.actions_batch(ns, na);
  const auto y = critic.bellman_targets(batch, na);
  double mse = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto [v1, v2] = critic.twin_values(batch[i]->s, batch[i]->a);
    const double q = std::max(v1, v2);
    mse += (q - y[i]) * (q - y[i]);
  }
  std::printf("holdout-ish targets mse %.5f\n", mse / 1000);
  return 0;
}
