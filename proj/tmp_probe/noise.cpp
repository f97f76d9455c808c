#include <cstdio>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main() {
  NavConfig cfg = resolve_env("nav1");
  for (const double noise : {0.3, 0.6, 1.0, 1.5}) {
    ConstrainedEnv env(cfg, 80);
    const Dataset data = collect_offline(env, 8000, noise);
    ReplayBuffer buf;
    for (const Transition& t : data.rows) buf.push(t);

    SafetyCriticConfig ccfg;
    ccfg.gamma_risk = 0.8;
    SafetyCritic critic(ccfg, Rng(81));
    ModelFreeRecovery rec({}, Rng(82));
    Rng train(83);
    pretrain_mf_recovery(critic, rec, buf, 4000, 256, train);

    int good = 0;
    double qgap = 0.0;
    // physically safest vs most dangerous unit action at gap states
    for (const Vec2 s : {Vec2{-27.0, 9.6}, Vec2{-27.0, 1.0}, Vec2{-21.5, 5.0}, Vec2{-32.6, 5.0},
                         Vec2{-27.0, 0.2}, Vec2{-24.0, -9.6}}) {
      double best = 1e9, bax = 0, bay = 0;
      for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j) {
          const Vec2 a{i / 4.0, j / 4.0};
          const double q = critic.qrisk(s, a);
          if (q < best) { best = q; bax = a[0]; bay = a[1]; }
        }
      // safe iff the swept step from s with the argmin action is collision-free
      const Vec2 sn{s[0] + 0.8 * bax, s[1] + 0.8 * bay};
      bool hit = !cfg.workspace.contains(sn);
      for (const Rect& ob : cfg.obstacles) hit = hit || segment_intersects_rect(s, sn, ob);
      good += hit ? 0 : 1;
      qgap += critic.qrisk(s, {0.0, s[1] > 0 ? -1.0 : 1.0}) - best;
    }

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
    auto rate = [&](bool pol, uint64_t seed) {
      ConstrainedEnv roll(cfg, seed);
      Rng act_rng(seed + 1);
      int v = 0;
      for (const Vec2& s0 : starts) {
        Vec2 s = roll.reset_to(s0);
        for (int t = 0; t < 5; ++t) {
          const Vec2 a =
              pol ? rec.action(s) : Vec2{act_rng.uniform(-1.0, 1.0), act_rng.uniform(-1.0, 1.0)};
          const StepResult r = roll.step(a);
          if (r.c > 0.5) { ++v; break; }
          if (r.done) break;
          s = r.next;
        }
      }
      return v / 100.0;
    };
    std::printf("noise %.1f: violations %4d argmin-safe %d/6 qgap %.3f rec %.2f rnd %.2f\n", noise,
                (int)data.violations, good, qgap / 6, rate(true, 90), rate(false, 91));
  }
  return 0;
}
