#include <cstdio>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main(int argc, char** argv) {
  const double noise = argc > 1 ? std::atof(argv[1]) : 0.3;
  NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, noise);
  ReplayBuffer buf;
  for (const Transition& t : data.rows) buf.push(t);

  // How much near-face data exists, split by face side.
  int left_hits = 0, right_hits = 0, left_rows = 0, right_rows = 0;
  for (const Transition& t : data.rows) {
    if (t.s[0] < -32.0 && t.s[0] > -33.5 && std::abs(t.s[1]) > 1.0 && std::abs(t.s[1]) < 9.5) {
      ++left_rows;
      if (t.c > 0.5) ++left_hits;
    }
    if (t.s[0] > -22.0 && t.s[0] < -20.5 && std::abs(t.s[1]) > 1.0 && std::abs(t.s[1]) < 9.5) {
      ++right_rows;
      if (t.c > 0.5) ++right_hits;
    }
  }
  std::printf("strip rows left %d (c=1: %d)  right %d (c=1: %d)\n", left_rows, left_hits,
              right_rows, right_hits);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  SafetyCritic critic(ccfg, Rng(81));
  ModelFreeRecovery rec({}, Rng(82));
  Rng train(83);
  pretrain_mf_recovery(critic, rec, buf, 2000, 1000, train);

  const Vec2 probes[] = {{-32.4, 3.0}, {-32.4, 5.0}, {-32.4, 7.0}, {-33.5, 5.0},
                         {-36.0, 5.0}, {-21.6, 5.0}, {-20.5, 5.0}};
  for (const Vec2 s : probes) {
    const Vec2 a = rec.action(s);
    std::printf(
        "s (%5.1f,%4.1f) q(+x)=%.3f q(-x)=%.3f q(+y)=%.3f q(-y)=%.3f q(0)=%.3f | pi (%5.2f,%5.2f) "
        "q(pi)=%.3f\n",
        s[0], s[1], critic.qrisk(s, {1, 0}), critic.qrisk(s, {-1, 0}), critic.qrisk(s, {0, 1}),
        critic.qrisk(s, {0, -1}), critic.qrisk(s, {0, 0}), a[0], a[1], critic.qrisk(s, a));
  }
  return 0;
}
