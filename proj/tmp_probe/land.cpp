#include <cstdio>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main() {
  const NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, cfg.collect_noise);
  ReplayBuffer buf;
  for (const Transition& t : data.rows) buf.push(t);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  SafetyCritic critic(ccfg, Rng(81));
  ModelFreeRecovery rec({}, Rng(82));
  Rng train(83);
  pretrain_mf_recovery(critic, rec, buf, 4000, 256, train);

  // action-grid argmin at probe states (obstacle1 y in [1.5,9], x in [-32,-22])
  for (const Vec2 s : {Vec2{-27.0, 9.6}, Vec2{-27.0, 1.0}, Vec2{-21.5, 5.0}, Vec2{-32.6, 5.0},
                       Vec2{-27.0, 0.2}, Vec2{-27.0, -1.0}}) {
    double best = 1e9, bax = 0, bay = 0, worst = -1e9;
    for (int i = -4; i <= 4; ++i)
      for (int j = -4; j <= 4; ++j) {
        const Vec2 a{i / 4.0, j / 4.0};
        const double q = critic.qrisk(s, a);
        if (q < best) { best = q; bax = a[0]; bay = a[1]; }
        if (q > worst) worst = q;
      }
    std::printf("state (%5.1f,%4.1f): argmin a (%5.2f,%5.2f) q %.3f  (max q %.3f)  q(0,+1)=%.3f q(0,-1)=%.3f q(+1,0)=%.3f q(-1,0)=%.3f\n",
                s[0], s[1], bax, bay, best, worst, critic.qrisk(s, {0, 1}), critic.qrisk(s, {0, -1}),
                critic.qrisk(s, {1, 0}), critic.qrisk(s, {-1, 0}));
  }
  return 0;
}
