#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <tuple>

#include "rrl/env_config.hpp"
#include "rrl/safety_critic.hpp"
#include "rrl/tabular.hpp"
#include "tabular_train.hpp"

using namespace rrl;
using rrl_test::embed;

namespace {

// s0 -> s1 -> s2, s2 violating and absorbing; single action.
TabularCmdp chain_mdp(double gamma) {
  TabularCmdp m;
  m.ns = 3;
  m.na = 1;
  m.gamma = gamma;
  m.P.assign(9, 0.0);
  m.P[0 * 3 + 1] = 1.0;  // s0 -> s1
  m.P[1 * 3 + 2] = 1.0;  // s1 -> s2
  m.P[2 * 3 + 2] = 1.0;  // absorbing
  m.c = {0.0, 0.0, 1.0};
  m.pi = {1.0, 1.0, 1.0};
  return m;
}

void zero_head(Mlp& net) {
  net.w.back().zero();
  std::fill(net.b.back().begin(), net.b.back().end(), 0.0);
}

SafetyCritic fresh_critic(double gamma, uint64_t seed, std::vector<int> hidden = {32, 32}) {
  SafetyCriticConfig cfg;
  cfg.gamma_risk = gamma;
  cfg.hidden = std::move(hidden);
  return SafetyCritic(cfg, Rng(seed));
}

}  // namespace

TEST_CASE("oracle values on the deterministic chain") {
  for (double gamma : {0.0, 0.3, 0.8, 1.0}) {
    const TabularCmdp m = chain_mdp(gamma);
    const auto q = oracle_qrisk(m);
    REQUIRE(q[0] == Catch::Approx(gamma).margin(1e-9));  // one step before the fatal hop
    REQUIRE(q[1] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(q[2] == Catch::Approx(1.0).margin(1e-9));  // self-loop arrives at cost 1
  }
}

TEST_CASE("oracle on an all-safe MDP is identically zero") {
  TabularCmdp m = chain_mdp(0.9);
  m.c = {0.0, 0.0, 0.0};
  const auto q = oracle_qrisk(m);
  for (double v : q) REQUIRE(v == 0.0);
}

TEST_CASE("oracle rejects malformed MDPs") {
  SECTION("non-stochastic transition row") {
    TabularCmdp m = chain_mdp(0.9);
    m.P[0 * 3 + 1] = 0.7;  // row sums to 0.7
    REQUIRE_THROWS(oracle_qrisk(m));
  }
  SECTION("violating state that is not absorbing") {
    TabularCmdp m = chain_mdp(0.9);
    m.P[2 * 3 + 2] = 0.0;
    m.P[2 * 3 + 0] = 1.0;
    REQUIRE_THROWS(oracle_qrisk(m));
  }
}

TEST_CASE("gamma one equals total violation probability on terminating MDPs") {
  // two-armed chance node: from s0, action 0 leads to violation with
  // probability p, otherwise to a safe absorbing state
  const double p = 0.37;
  TabularCmdp m;
  m.ns = 3;
  m.na = 1;
  m.gamma = 1.0;
  m.P.assign(9, 0.0);
  m.P[0 * 3 + 2] = p;        // violating
  m.P[0 * 3 + 1] = 1.0 - p;  // safe sink
  m.P[1 * 3 + 1] = 1.0;
  m.P[2 * 3 + 2] = 1.0;
  m.c = {0.0, 0.0, 1.0};
  m.pi = {1.0, 1.0, 1.0};
  const auto q = oracle_qrisk(m);
  REQUIRE(q[0] == Catch::Approx(p).margin(1e-9));

  Rng rng(17);
  const int n = 100000;
  const double mc = rollout_qrisk(m, 0, 0, n, 100, rng);
  const double sd = std::sqrt(p * (1.0 - p) / n);
  REQUIRE(std::abs(mc - q[0]) <= 3.0 * sd);
}

TEST_CASE("zero-init head gives one half everywhere") {
  SafetyCritic critic = fresh_critic(0.8, 3);
  zero_head(critic.twin1());
  zero_head(critic.twin2());
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const double q = critic.qrisk({rng.normal(), rng.normal()}, {rng.normal(), rng.normal()});
    REQUIRE(q == 0.5);
  }
}

TEST_CASE("bellman targets follow the arrival-cost backup") {
  SafetyCritic critic = fresh_critic(0.8, 5);
  zero_head(critic.twin1());
  zero_head(critic.twin2());
  critic.sync_targets();  // targets now also output exactly 0.5
  Transition viol, safe;
  viol.c = 1.0;
  viol.sn = {3.0, -2.0};
  safe.c = 0.0;
  safe.sn = {0.5, 0.5};
  Matrix an(2, 2);  // successor actions, arbitrary
  const auto y = critic.bellman_targets({&viol, &safe}, an);
  REQUIRE(y[0] == 1.0);                                  // c = 1 pins the target at 1
  REQUIRE(y[1] == Catch::Approx(0.4).margin(1e-12));     // 0.8 * 0.5

  SECTION("gamma zero zeroes the continuation") {
    SafetyCritic c0 = fresh_critic(0.0, 5);
    const auto y0 = c0.bellman_targets({&safe}, an);
    REQUIRE(y0[0] == 0.0);
  }
  SECTION("target is monotone in the target-net value when c = 0") {
    // raise one target head bias: sigmoid grows, so must the backup
    SafetyCritic up = fresh_critic(0.8, 5);
    zero_head(up.twin1());
    zero_head(up.twin2());
    up.save("/tmp/rrl_sc_");  // reuse serialization to copy into targets
    SafetyCritic probe = fresh_critic(0.8, 5);
    probe.load("/tmp/rrl_sc_");
    auto base = probe.bellman_targets({&safe}, an);
    Mlp raised = load_net("/tmp/rrl_sc_risk_q1_target.rrlnet");
    raised.b.back()[0] = 1.0;
    save_net(raised, "/tmp/rrl_sc_risk_q1_target.rrlnet");
    probe.load("/tmp/rrl_sc_");
    auto higher = probe.bellman_targets({&safe}, an);
    REQUIRE(higher[0] > base[0]);
    const auto yv = probe.bellman_targets({&viol}, an);
    REQUIRE(yv[0] == 1.0);
  }
}

TEST_CASE("identical twins at their own targets have zero gradient") {
  SafetyCritic critic = fresh_critic(0.8, 9);
  // make twin2 a bitwise copy of twin1
  critic.twin2() = critic.twin1();
  Rng rng(2);
  Matrix sa(8, 4);
  for (auto& v : sa.a) v = rng.normal();
  MlpCache c;
  forward(critic.twin1(), sa, c);
  std::vector<double> y(output_of(c).a.begin(), output_of(c).a.end());
  MlpGrads g1, g2;
  g1.match(critic.twin1());
  g2.match(critic.twin2());
  const double loss = critic.loss_and_grads(sa, y, g1, g2);
  REQUIRE(loss == Catch::Approx(0.0).margin(1e-24));
  for (const auto& m : g1.dw)
    for (double v : m.a) REQUIRE(std::abs(v) < 1e-15);
  for (const auto& m : g2.dw)
    for (double v : m.a) REQUIRE(std::abs(v) < 1e-15);
}

TEST_CASE("critic loss gradient matches finite differences") {
  const double h = 1e-5;
  SafetyCritic critic = fresh_critic(0.8, 31, {6, 5});
  Rng rng(8);
  const int B = 5;
  Matrix sa(B, 4);
  std::vector<double> y(B);
  // keep relu pre-activations away from kinks for valid differences
  bool clean = false;
  for (int attempt = 0; attempt < 100 && !clean; ++attempt) {
    for (auto& v : sa.a) v = rng.normal();
    clean = true;
    for (Mlp* net : {&critic.twin1(), &critic.twin2()}) {
      MlpCache c;
      forward(*net, sa, c);
      for (size_t l = 0; l + 1 < net->layer_count() + 1 && l < net->layer_count(); ++l)
        if (net->act_at(l) == Act::Relu)
          for (double z : c.z[l].a)
            if (std::abs(z) < 1e-3) clean = false;
    }
  }
  REQUIRE(clean);
  for (auto& v : y) v = rng.uniform(0.05, 0.95);

  MlpGrads g1, g2;
  g1.match(critic.twin1());
  g2.match(critic.twin2());
  critic.loss_and_grads(sa, y, g1, g2);

  auto fd_check = [&](Mlp& net, const MlpGrads& g) {
    MlpGrads t1, t2;
    t1.match(critic.twin1());
    t2.match(critic.twin2());
    for (size_t l = 0; l < net.layer_count(); ++l) {
      for (size_t i = 0; i < net.w[l].a.size(); ++i) {
        double& p = net.w[l].a[i];
        const double keep = p;
        p = keep + h;
        const double lp = critic.loss_and_grads(sa, y, t1, t2);
        p = keep - h;
        const double lm = critic.loss_and_grads(sa, y, t1, t2);
        p = keep;
        const double fd = (lp - lm) / (2.0 * h);
        REQUIRE(std::abs(g.dw[l].a[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
      for (size_t i = 0; i < net.b[l].size(); ++i) {
        double& p = net.b[l][i];
        const double keep = p;
        p = keep + h;
        const double lp = critic.loss_and_grads(sa, y, t1, t2);
        p = keep - h;
        const double lm = critic.loss_and_grads(sa, y, t1, t2);
        p = keep;
        const double fd = (lp - lm) / (2.0 * h);
        REQUIRE(std::abs(g.db[l][i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  };
  fd_check(critic.twin1(), g1);
  fd_check(critic.twin2(), g2);
}

TEST_CASE("pessimism reports at least each twin") {
  SafetyCritic critic = fresh_critic(0.8, 12);
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Vec2 s{rng.normal(), rng.normal()}, a{rng.normal(), rng.normal()};
    const auto [v1, v2] = critic.twin_values(s, a);
    const double q = critic.qrisk(s, a);
    REQUIRE(q >= v1);
    REQUIRE(q >= v2);
    REQUIRE(q == std::max(v1, v2));
    REQUIRE(q > 0.0);
    REQUIRE(q < 1.0);
  }
}

TEST_CASE("ten thousand chain updates land within 0.05 of the oracle") {
  const TabularCmdp m = chain_mdp(0.8);
  const auto oracle = oracle_qrisk(m);
  Rng data_rng(100);
  const ReplayBuffer data = rrl_test::tabular_dataset(m, 300, data_rng);
  SafetyCritic critic = fresh_critic(0.8, 555);
  Rng train_rng(556);
  critic.pretrain(data, 10000, 256, train_rng);
  const double sup = rrl_test::trained_critic_sup_error(m, critic, oracle);
  INFO("sup error " << sup);
  REQUIRE(sup <= 0.05);
}

TEST_CASE("gamma zero critic learns one-step violation probability") {
  TabularCmdp m;
  m.ns = 4;
  m.na = 2;
  m.gamma = 0.0;
  m.P.assign(4 * 2 * 4, 0.0);
  auto set = [&](int s, int a, int sn, double p) { m.P[(s * 2 + a) * 4 + sn] = p; };
  set(0, 0, 3, 0.3);
  set(0, 0, 1, 0.7);
  set(0, 1, 1, 1.0);
  set(1, 0, 2, 1.0);
  set(1, 1, 3, 0.5);
  set(1, 1, 2, 0.5);
  set(2, 0, 2, 1.0);
  set(2, 1, 2, 1.0);
  set(3, 0, 3, 1.0);
  set(3, 1, 3, 1.0);
  m.c = {0.0, 0.0, 0.0, 1.0};
  m.pi = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  const auto oracle = oracle_qrisk(m);
  REQUIRE(oracle[0 * 2 + 0] == Catch::Approx(0.3).margin(1e-9));
  REQUIRE(oracle[1 * 2 + 1] == Catch::Approx(0.5).margin(1e-9));

  Rng data_rng(41);
  const ReplayBuffer data = rrl_test::tabular_dataset(m, 300, data_rng);
  SafetyCritic critic = fresh_critic(0.0, 777);
  Rng train_rng(778);
  critic.pretrain(data, 6000, 256, train_rng);
  const double sup = rrl_test::trained_critic_sup_error(m, critic, oracle);
  INFO("sup error " << sup);
  REQUIRE(sup <= 0.05);
}

TEST_CASE("pretraining is deterministic and zero steps is a no-op") {
  const TabularCmdp m = chain_mdp(0.65);
  Rng data_rng(1);
  const ReplayBuffer data = rrl_test::tabular_dataset(m, 50, data_rng);

  auto run = [&](int steps) {
    SafetyCritic critic = fresh_critic(0.65, 99);
    Rng train_rng(7);
    critic.pretrain(data, steps, 64, train_rng);
    return critic;
  };
  SafetyCritic a = run(200), b = run(200), untouched = run(0), fresh = fresh_critic(0.65, 99);
  for (size_t l = 0; l < a.twin1().layer_count(); ++l) {
    REQUIRE(a.twin1().w[l].a == b.twin1().w[l].a);
    REQUIRE(a.twin2().w[l].a == b.twin2().w[l].a);
    REQUIRE(untouched.twin1().w[l].a == fresh.twin1().w[l].a);
  }
}

TEST_CASE("zero-violation datasets warn and drive the critic down") {
  ReplayBuffer data(1000);
  Rng rng(6);
  for (int i = 0; i < 400; ++i) {
    Transition t;
    t.s = {rng.normal(), rng.normal()};
    t.a = {rng.normal(), rng.normal()};
    t.sn = {rng.normal(), rng.normal()};
    t.c = 0.0;
    data.push(t);
  }
  SafetyCritic critic = fresh_critic(0.8, 21);
  Rng train_rng(22);
  REQUIRE_NOTHROW(critic.pretrain(data, 400, 64, train_rng));
  double mean_q = 0.0;
  for (int i = 0; i < 50; ++i)
    mean_q += critic.qrisk({train_rng.normal(), train_rng.normal()},
                           {train_rng.normal(), train_rng.normal()});
  REQUIRE(mean_q / 50.0 < 0.4);
}

TEST_CASE("pretrained critic separates violating from safe transitions") {
  const NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 0);
  const Dataset d = collect_offline(env, cfg.offline_transitions, cfg.collect_noise);
  ReplayBuffer offline(d.rows.size());
  for (const auto& t : d.rows) offline.push(t);

  SafetyCriticConfig ccfg;
  ccfg.gamma_risk = 0.8;
  std::tie(ccfg.state_shift, ccfg.state_scale) = workspace_norm(cfg);
  SafetyCritic critic(ccfg, Rng(1000));
  Rng train_rng(1001);
  critic.pretrain(offline, 10000, 1000, train_rng);

  double viol = 0.0, safe = 0.0;
  int nv = 0, nsf = 0;
  for (const auto& t : d.rows) {
    const double q = critic.qrisk(t.s, t.a);
    if (t.c > 0.5) {
      viol += q;
      ++nv;
    } else {
      safe += q;
      ++nsf;
    }
  }
  viol /= nv;
  safe /= nsf;
  INFO("violating mean " << viol << " safe mean " << safe);
  REQUIRE(viol - safe >= 0.3);

  SECTION("states at violation zones outscore the start region") {
    double zone = 0.0, start = 0.0;
    int nz = 0;
    for (const auto& t : d.rows)
      if (t.c > 0.5) {
        zone += critic.qrisk(t.s, t.a);
        ++nz;
      }
    Rng r2(5);
    for (int i = 0; i < 200; ++i)
      start += critic.qrisk({r2.normal(-50.0, 1.0), r2.normal(0.0, 1.0)},
                            {r2.uniform(-1.0, 1.0), r2.uniform(-1.0, 1.0)});
    REQUIRE(zone / nz - start / 200.0 >= 0.2);
  }
}
