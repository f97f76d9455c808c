#include <cstdio>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main(int argc, char** argv) {
  const double noise = argc > 1 ? std::atof(argv[1]) : 0.3;
  const int width = argc > 2 ? std::atoi(argv[2]) : 64;
  const int steps = argc > 3 ? std::atoi(argv[3]) : 4000;
  NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, noise);
  ReplayBuffer buf;
  for (const Transition& t : data.rows) buf.push(t);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  ccfg.hidden = {(size_t)width, (size_t)width};
  SafetyCritic critic(ccfg, Rng(81));
  MfRecoveryConfig rcfg;
  rcfg.hidden = {(size_t)width, (size_t)width};
  ModelFreeRecovery rec(rcfg, Rng(82));
  Rng train(83);

  auto argmin_action = [&](Vec2 s) {
    Vec2 best{0, 0};
    double bq = 1e9;
    for (int i = 0; i <= 16; ++i)
      for (int j = 0; j <= 16; ++j) {
        const Vec2 a{-1.0 + i / 8.0, -1.0 + j / 8.0};
        const double q = critic.qrisk(s, a);
        if (q < bq) { bq = q; best = a; }
      }
    return best;
  };
  Rng pick(84);
  std::vector<Vec2> starts;
  while (starts.size() < 100) {
    const Rect& ob = cfg.obstacles[pick.uniform_int(cfg.obstacles.size())];
    Vec2 s{pick.uniform(ob.lo[0] - 0.5, ob.hi[0] + 0.5),
           pick.uniform(ob.lo[1] - 0.5, ob.hi[1] + 0.5)};
    if (!cfg.workspace.contains(s)) continue;
    bool inside = false;
    for (const Rect& r : cfg.obstacles) inside = inside || r.contains(s);
    if (inside) continue;
    starts.push_back(s);
  }
  auto rate = [&](int mode, uint64_t seed) {
    ConstrainedEnv roll(cfg, seed);
    Rng act_rng(seed + 1);
    int v = 0;
    for (const Vec2& s0 : starts) {
      Vec2 s = roll.reset_to(s0);
      for (int t = 0; t < 5; ++t) {
        Vec2 a;
        if (mode == 0) a = Vec2{act_rng.uniform(-1.0, 1.0), act_rng.uniform(-1.0, 1.0)};
        else if (mode == 1) a = rec.action(s);
        else a = argmin_action(s);
        const StepResult r = roll.step(a);
        if (r.c > 0.5) { ++v; break; }
        if (r.done) break;
        s = r.next;
      }
    }
    return v / 100.0;
  };

  std::printf("noise %.1f width %d rnd %.2f\n", noise, width, rate(0, 91));
  const int block = steps / 4;
  for (int b = 0; b < 4; ++b) {
    pretrain_mf_recovery(critic, rec, buf, block, 1000, train);
    std::printf("steps %5d actor %.2f argmin %.2f\n", block * (b + 1), rate(1, 90), rate(2, 90));
  }
  for (const Vec2 probe : {Vec2{-27.0, 1.0}, Vec2{-27.0, -1.0}, Vec2{-23.0, 1.0}}) {
    std::printf("  at (%5.1f,%4.1f) q(up)=%.3f q(flee-x)=%.3f q(down)=%.3f\n", probe[0], probe[1],
                critic.qrisk(probe, {1.0, 0.98}), critic.qrisk(probe, {1.0, 0.0}),
                critic.qrisk(probe, {1.0, -0.98}));
  }
  return 0;
}
