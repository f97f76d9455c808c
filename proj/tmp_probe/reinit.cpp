#include <cstdio>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main(int argc, char** argv) {
  const double noise = argc > 1 ? std::atof(argv[1]) : 0.6;
  NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, noise);
  ReplayBuffer buf;
  for (const Transition& t : data.rows) buf.push(t);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  SafetyCritic critic(ccfg, Rng(81));
  ModelFreeRecovery rec({}, Rng(82));
  Rng train(83);
  pretrain_mf_recovery(critic, rec, buf, 2000, 1000, train);

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
  auto rate = [&](ModelFreeRecovery* pol, uint64_t seed) {
    ConstrainedEnv roll(cfg, seed);
    Rng act_rng(seed + 1);
    int v = 0;
    for (const Vec2& s0 : starts) {
      Vec2 s = roll.reset_to(s0);
      for (int t = 0; t < 5; ++t) {
        const Vec2 a =
            pol ? pol->action(s) : Vec2{act_rng.uniform(-1.0, 1.0), act_rng.uniform(-1.0, 1.0)};
        const StepResult r = roll.step(a);
        if (r.c > 0.5) { ++v; break; }
        if (r.done) break;
        s = r.next;
      }
    }
    return v / 100.0;
  };
  std::printf("rnd %.2f co-trained rec %.2f\n", rate(nullptr, 91), rate(&rec, 90));

  ModelFreeRecovery fresh({}, Rng(182));
  for (int b = 0; b < 6; ++b) {
    for (int i = 0; i < 500; ++i) {
      const auto batch = buf.sample(1000, train);
      fresh.update(batch, critic);
    }
    std::printf("fresh steps %4d rec %.2f\n", 500 * (b + 1), rate(&fresh, 90));
  }
  for (const Vec2 probe : {Vec2{-27.0, 9.6}, Vec2{-27.0, 1.0}, Vec2{-27.0, 0.2}, Vec2{-21.5, 5.0}}) {
    const Vec2 a = fresh.action(probe);
    std::printf("  at (%5.1f,%4.1f) act (%5.2f,%5.2f) q(pi) %.3f\n", probe[0], probe[1], a[0], a[1],
                critic.qrisk(probe, a));
  }
  return 0;
}
