#include <cstdio>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"
using namespace rrl;

int main(int argc, char** argv) {
  const int mode = argc > 1 ? std::atoi(argv[1]) : 0;
  if (mode == 0) {
    Rng data_rng(15);
    ReplayBuffer data;
    for (int i = 0; i < 2000; ++i) {
      Transition t;
      t.s = {data_rng.uniform(-1.0, 1.0), data_rng.uniform(-1.0, 1.0)};
      t.a = t.a_task = {data_rng.uniform(-1.0, 1.0), data_rng.uniform(-1.0, 1.0)};
      t.sn = {t.s[0] + 0.8 * t.a[0], t.s[1] + 0.8 * t.a[1]};
      data.push(t);
    }
    for (double lr : {3e-4, 1e-3, 3e-3}) {
      DynamicsConfig cfg;
      cfg.lr = lr;
      DynamicsEnsemble ens(cfg, Rng(16));
      Rng rng(17);
      for (int block = 0; block < 10; ++block) {
        ens.train_epochs(data, 40, 256, rng);
        Rng held(18);
        Matrix sa(200, 4), mean, lv;
        for (auto& v : sa.a) v = held.uniform(-1.0, 1.0);
        double max_err = 0.0, mlv = 0.0;
        for (int k = 0; k < ens.members(); ++k) {
          ens.predict(k, sa, mean, lv);
          for (int i = 0; i < 200; ++i)
            for (int d = 0; d < 2; ++d) {
              max_err = std::max(max_err, std::abs(mean(i, d) - 0.8 * sa(i, 2 + d)));
              mlv += lv(i, d);
            }
        }
        std::printf("lr %.0e epochs %3d max_err %.4f mean_lv %.2f\n", lr, 40 * (block + 1),
                    max_err, mlv / (ens.members() * 400));
      }
    }
    return 0;
  }

  // mode 1: near-obstacle recovery rate vs pretraining depth
  const NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, cfg.collect_noise);
  ReplayBuffer buf;
  for (const Transition& t : data.rows) buf.push(t);
  std::printf("violations in data: %d\n", (int)data.violations);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  SafetyCritic critic(ccfg, Rng(81));
  ModelFreeRecovery rec({}, Rng(82));
  Rng train(83);

  Rng pick(84);
  std::vector<Vec2> starts;
  while (starts.size() < 100) {
    const Rect& ob = cfg.obstacles[pick.uniform_int(cfg.obstacles.size())];
    const double pad = 0.5;
    Vec2 s{pick.uniform(ob.lo[0] - pad, ob.hi[0] + pad),
           pick.uniform(ob.lo[1] - pad, ob.hi[1] + pad)};
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
  std::printf("random rate: %.2f\n", rate(false, 91));
  for (int block = 0; block < 6; ++block) {
    pretrain_mf_recovery(critic, rec, buf, 1000, 256, train);
    std::printf("steps %5d rec rate %.2f\n", 1000 * (block + 1), rate(true, 90));
    // sample a few actions near the first obstacle
    if (block == 5) {
      for (const Vec2 probe : {Vec2{-27.0, 1.0}, Vec2{-27.0, 9.6}, Vec2{-21.5, 5.0},
                               Vec2{-32.5, 5.0}, Vec2{-27.0, 0.2}}) {
        const Vec2 a = rec.action(probe);
        std::printf("  at (%5.1f,%4.1f) act (%.2f,%.2f) q %.3f\n", probe[0], probe[1], a[0], a[1],
                    critic.qrisk(probe, a));
      }
    }
  }
  return 0;
}
