#include <cstdio>
#include <cstring>

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

  // Region of a start: channel (between slabs), above top slab, below bottom slab,
  // left of slabs, right of slabs.
  auto region = [&](Vec2 s) -> const char* {
    const bool in_x = s[0] >= -32.0 && s[0] <= -22.0;
    if (in_x && s[1] > -1.5 && s[1] < 1.5) return "channel";
    if (in_x && s[1] >= 9.0) return "above";
    if (in_x && s[1] <= -9.0) return "below";
    if (s[0] < -32.0) return "left";
    return "right";
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

  // Per-region tallies: starts, rec violations, rnd violations (10 trials each).
  struct Tally { int n = 0; int rec = 0; int rnd = 0; };
  std::map<std::string, Tally> tal;
  ConstrainedEnv roll(cfg, 90);
  Rng act_rng(91);
  for (const Vec2& s0 : starts) {
    Tally& t = tal[region(s0)];
    ++t.n;
    {
      Vec2 s = roll.reset_to(s0);
      for (int k = 0; k < 5; ++k) {
        const StepResult r = roll.step(rec.action(s));
        if (r.c > 0.5) { ++t.rec; break; }
        if (r.done) break;
        s = r.next;
      }
    }
    for (int trial = 0; trial < 10; ++trial) {
      Vec2 s = roll.reset_to(s0);
      for (int k = 0; k < 5; ++k) {
        const StepResult r =
            roll.step({act_rng.uniform(-1.0, 1.0), act_rng.uniform(-1.0, 1.0)});
        if (r.c > 0.5) { ++t.rnd; break; }
        if (r.done) break;
        s = r.next;
      }
    }
  }
  for (const auto& [name, t] : tal)
    std::printf("%-8s n %3d rec %.2f rnd %.2f\n", name.c_str(), t.n, (double)t.rec / t.n,
                (double)t.rnd / (10.0 * t.n));

  // Sample actor actions per region.
  std::printf("sample actions:\n");
  int shown = 0;
  for (const Vec2& s0 : starts) {
    if (shown >= 14) break;
    const Vec2 a = rec.action(s0);
    std::printf("  %-8s (%6.2f,%6.2f) -> (%5.2f,%5.2f)\n", region(s0), s0[0], s0[1], a[0], a[1]);
    ++shown;
  }
  return 0;
}
