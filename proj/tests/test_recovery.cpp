#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <tuple>
#include <vector>

#include "rrl/env_config.hpp"
#include "rrl/recovery.hpp"

using namespace rrl;

namespace {

bool nets_equal(const Mlp& a, const Mlp& b) {
  if (a.dims != b.dims) return false;
  for (size_t l = 0; l < a.layer_count(); ++l) {
    if (a.w[l].a != b.w[l].a) return false;
    if (a.b[l] != b.b[l]) return false;
  }
  return true;
}

// wire a critic twin to compute sigmoid(gain * input[coord]) exactly:
// relu pairs carry the signed coordinate through both hidden layers
void plant_coordinate(Mlp& net, int coord, double gain) {
  for (auto& m : net.w) m.zero();
  for (auto& v : net.b) std::fill(v.begin(), v.end(), 0.0);
  net.w[0](0, coord) = 1.0;
  net.w[0](1, coord) = -1.0;
  net.w[1](0, 0) = 1.0;
  net.w[1](1, 1) = 1.0;
  net.w[2](0, 0) = gain;
  net.w[2](0, 1) = -gain;
}

SafetyCritic planted_critic(int coord, double gain) {
  SafetyCriticConfig cfg;
  cfg.gamma_risk = 0.8;
  SafetyCritic critic(cfg, Rng(1));
  plant_coordinate(critic.twin1(), coord, gain);
  critic.twin2() = critic.twin1();
  critic.sync_targets();
  return critic;
}

ReplayBuffer linear_system_data(int n, double gain, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ReplayBuffer buf;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.s = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
    t.a = t.a_task = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.sn = {t.s[0] + gain * t.a[0], t.s[1] + gain * t.a[1]};
    buf.push(t);
  }
  return buf;
}

}  // namespace

TEST_CASE("zero-initialized recovery actor emits the zero action") {
  ModelFreeRecovery rec({}, Rng(2));
  for (auto& m : rec.actor().w) m.zero();
  for (auto& v : rec.actor().b) std::fill(v.begin(), v.end(), 0.0);
  const Vec2 a = rec.action({1.3, -0.7});
  REQUIRE(a[0] == 0.0);
  REQUIRE(a[1] == 0.0);
}

TEST_CASE("recovery action is deterministic in the state") {
  ModelFreeRecovery rec({}, Rng(3));
  const Vec2 a1 = rec.action({0.4, -0.9});
  const Vec2 a2 = rec.action({0.4, -0.9});
  REQUIRE(a1[0] == a2[0]);
  REQUIRE(a1[1] == a2[1]);
}

TEST_CASE("recovery actions stay inside the scaled action box") {
  MfRecoveryConfig cfg;
  cfg.action_scale = 0.7;
  ModelFreeRecovery rec(cfg, Rng(4));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 a = rec.action({rng.normal(0.0, 5.0), rng.normal(0.0, 5.0)});
    REQUIRE(std::abs(a[0]) < 0.7);
    REQUIRE(std::abs(a[1]) < 0.7);
  }
}

TEST_CASE("training against a first-coordinate risk pushes that coordinate to the floor") {
  SafetyCritic critic = planted_critic(2, 1.0);  // qrisk = sigmoid(a0)
  MfRecoveryConfig cfg;
  cfg.lr = 3e-3;
  ModelFreeRecovery rec(cfg, Rng(6));
  Rng rng(7);
  std::vector<Transition> rows(64);
  std::vector<const Transition*> batch;
  for (auto& t : rows) {
    t.s = {rng.normal(), rng.normal()};
    batch.push_back(&t);
  }
  for (int i = 0; i < 2000; ++i) rec.update(batch, critic);
  for (int i = 0; i < 10; ++i) {
    const Vec2 a = rec.action({rng.normal(), rng.normal()});
    REQUIRE(a[0] < -0.9);
  }
}

TEST_CASE("a constant critic leaves the recovery actor gradient at zero") {
  MfRecoveryConfig rcfg;
  rcfg.sat_penalty = 0.0;  // isolate the value-gradient path
  ModelFreeRecovery rec(rcfg, Rng(8));
  ValueGradFn flat = [](const Matrix& s, const Matrix& a, std::vector<double>& v, Matrix& dv) {
    v.assign(s.rows, 0.42);
    dv.reshape(a.rows, a.cols);
    dv.zero();
  };
  Rng rng(9);
  Matrix st(16, 2);
  for (auto& v : st.a) v = rng.normal();
  MlpGrads g;
  g.match(rec.actor());
  const double loss = rec.loss_and_grads(st, flat, g);
  REQUIRE(loss == Catch::Approx(0.42).margin(1e-12));
  for (const auto& m : g.dw)
    for (double v : m.a) REQUIRE(v == 0.0);
  for (const auto& v : g.db)
    for (double x : v) REQUIRE(x == 0.0);
}

TEST_CASE("recovery actor gradient matches finite differences") {
  const double h = 1e-5;
  MfRecoveryConfig cfg;
  cfg.hidden = {5, 4};
  cfg.action_scale = 0.8;
  ModelFreeRecovery rec(cfg, Rng(10));

  SafetyCriticConfig ccfg;
  ccfg.hidden = {6, 5};
  SafetyCritic critic(ccfg, Rng(11));
  critic.twin2() = critic.twin1();  // unambiguous max branch

  ValueGradFn smooth = [](const Matrix&, const Matrix& a, std::vector<double>& v, Matrix& dv) {
    v.resize(a.rows);
    dv.reshape(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
      v[i] = std::cos(a(i, 0)) + a(i, 1) * a(i, 1) * a(i, 1);
      dv(i, 0) = -std::sin(a(i, 0));
      dv(i, 1) = 3.0 * a(i, 1) * a(i, 1);
    }
  };
  ValueGradFn via_critic = [&critic](const Matrix& s, const Matrix& a, std::vector<double>& v,
                                     Matrix& dv) { critic.qrisk_action_grad(s, a, v, dv); };

  Rng rng(12);
  const int B = 4;
  Matrix st(B, 2);
  for (const bool use_critic : {false, true}) {
    const ValueGradFn& fn = use_critic ? via_critic : smooth;
    bool clean = false;
    for (int attempt = 0; attempt < 200 && !clean; ++attempt) {
      for (auto& v : st.a) v = rng.normal();
      clean = true;
      MlpCache c;
      forward(rec.actor(), st, c);
      for (size_t l = 0; l + 1 < rec.actor().layer_count(); ++l)
        for (double z : c.z[l].a)
          if (std::abs(z) < 1e-3) clean = false;
      if (use_critic && clean) {
        Matrix act(B, 2), sa(B, 4);
        const Matrix& y = output_of(c);
        for (int i = 0; i < B; ++i) {
          sa(i, 0) = st(i, 0);
          sa(i, 1) = st(i, 1);
          sa(i, 2) = 0.8 * y(i, 0);
          sa(i, 3) = 0.8 * y(i, 1);
        }
        MlpCache cq;
        forward(critic.twin1(), sa, cq);
        for (size_t l = 0; l < critic.twin1().layer_count(); ++l)
          if (critic.twin1().act_at(l) == Act::Relu)
            for (double z : cq.z[l].a)
              if (std::abs(z) < 2e-3) clean = false;
      }
    }
    REQUIRE(clean);

    MlpGrads g, scratch;
    g.match(rec.actor());
    scratch.match(rec.actor());
    rec.loss_and_grads(st, fn, g);
    Mlp& net = rec.actor();
    for (size_t l = 0; l < net.layer_count(); ++l) {
      for (size_t i = 0; i < net.w[l].a.size(); ++i) {
        double& p = net.w[l].a[i];
        const double keep = p;
        p = keep + h;
        const double lp = rec.loss_and_grads(st, fn, scratch);
        p = keep - h;
        const double lm = rec.loss_and_grads(st, fn, scratch);
        p = keep;
        const double fd = (lp - lm) / (2.0 * h);
        REQUIRE(std::abs(g.dw[l].a[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
      for (size_t i = 0; i < net.b[l].size(); ++i) {
        double& p = net.b[l][i];
        const double keep = p;
        p = keep + h;
        const double lp = rec.loss_and_grads(st, fn, scratch);
        p = keep - h;
        const double lm = rec.loss_and_grads(st, fn, scratch);
        p = keep;
        const double fd = (lp - lm) / (2.0 * h);
        REQUIRE(std::abs(g.db[l][i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("a quadratic action penalty decreases monotonically over recovery updates") {
  MfRecoveryConfig cfg;
  cfg.lr = 3e-3;
  ModelFreeRecovery rec(cfg, Rng(13));
  ValueGradFn quad = [](const Matrix&, const Matrix& a, std::vector<double>& v, Matrix& dv) {
    v.resize(a.rows);
    dv.reshape(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
      const double dx = a(i, 0) - 0.3, dy = a(i, 1) + 0.2;
      v[i] = dx * dx + dy * dy;
      dv(i, 0) = 2.0 * dx;
      dv(i, 1) = 2.0 * dy;
    }
  };
  Rng rng(14);
  Matrix st(64, 2);
  for (auto& v : st.a) v = rng.normal();
  std::vector<double> window(10, 0.0);
  for (int i = 0; i < 200; ++i) window[i / 20] += rec.update_with(st, quad);
  for (int w = 1; w < 10; ++w) REQUIRE(window[w] < window[w - 1]);
}

TEST_CASE("ensemble fits a noiseless linear system and floors its variance") {
  Rng data_rng(15);
  const ReplayBuffer data = linear_system_data(2000, 0.8, data_rng);
  DynamicsConfig cfg;
  cfg.lr = 1e-3;
  DynamicsEnsemble ens(cfg, Rng(16));
  Rng rng(17);
  ens.train_epochs(data, 100, 256, rng);

  Rng held(18);
  Matrix sa(200, 4), em, mean, logvar;
  for (auto& v : sa.a) v = held.uniform(-1.0, 1.0);
  ens.ensemble_mean(sa, em);
  double err = 0.0, mean_lv = 0.0;
  for (int i = 0; i < 200; ++i)
    for (int d = 0; d < 2; ++d) err += std::abs(em(i, d) - 0.8 * sa(i, 2 + d));
  for (int k = 0; k < ens.members(); ++k) {
    ens.predict(k, sa, mean, logvar);
    for (double v : logvar.a) mean_lv += v;
  }
  REQUIRE(err / 400.0 < 0.01);
  REQUIRE(mean_lv / (ens.members() * 400) < -8.0);
}

TEST_CASE("dynamics updates reject an empty buffer") {
  DynamicsEnsemble ens({}, Rng(19));
  ReplayBuffer empty;
  Rng rng(20);
  REQUIRE_THROWS_AS(ens.update(empty, 32, rng), std::invalid_argument);
  Matrix sa(0, 4), delta(0, 2);
  MlpGrads g;
  g.match(ens.member(0));
  REQUIRE_THROWS_AS(ens.member_nll_and_grads(0, sa, delta, g), std::invalid_argument);
}

TEST_CASE("dynamics NLL gradient matches finite differences") {
  const double h = 1e-5;
  DynamicsConfig cfg;
  cfg.hidden = {6, 5, 4};
  cfg.members = 1;
  DynamicsEnsemble ens(cfg, Rng(21));
  Rng rng(22);
  const int B = 5;
  Matrix sa(B, 4), delta(B, 2);
  for (auto& v : sa.a) v = rng.normal();
  for (auto& v : delta.a) v = rng.normal(0.0, 0.3);

  MlpGrads g, scratch;
  g.match(ens.member(0));
  scratch.match(ens.member(0));
  ens.member_nll_and_grads(0, sa, delta, g);
  Mlp& net = ens.member(0);
  for (size_t l = 0; l < net.layer_count(); ++l) {
    for (size_t i = 0; i < net.w[l].a.size(); ++i) {
      double& p = net.w[l].a[i];
      const double keep = p;
      p = keep + h;
      const double lp = ens.member_nll_and_grads(0, sa, delta, scratch);
      p = keep - h;
      const double lm = ens.member_nll_and_grads(0, sa, delta, scratch);
      p = keep;
      const double fd = (lp - lm) / (2.0 * h);
      REQUIRE(std::abs(g.dw[l].a[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
    for (size_t i = 0; i < net.b[l].size(); ++i) {
      double& p = net.b[l][i];
      const double keep = p;
      p = keep + h;
      const double lp = ens.member_nll_and_grads(0, sa, delta, scratch);
      p = keep - h;
      const double lm = ens.member_nll_and_grads(0, sa, delta, scratch);
      p = keep;
      const double fd = (lp - lm) / (2.0 * h);
      REQUIRE(std::abs(g.db[l][i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("ensemble disagreement rises off the training distribution") {
  Rng data_rng(23);
  ReplayBuffer data;
  for (int i = 0; i < 1500; ++i) {
    Transition t;
    t.s = {data_rng.uniform(0.0, 1.0), data_rng.uniform(0.0, 1.0)};
    t.a = t.a_task = {data_rng.uniform(-1.0, 1.0), data_rng.uniform(-1.0, 1.0)};
    t.sn = {t.s[0] + 0.2 * t.a[0], t.s[1] + 0.2 * t.a[1]};
    data.push(t);
  }
  DynamicsEnsemble ens({}, Rng(24));
  Rng rng(25);
  ens.train_epochs(data, 40, 256, rng);

  Matrix in_grid(100, 4), out_grid(100, 4);
  int r = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j, ++r) {
      in_grid(r, 0) = 0.2 + 0.06 * i;
      in_grid(r, 1) = 0.2 + 0.06 * j;
      in_grid(r, 2) = in_grid(r, 3) = 0.0;
      out_grid(r, 0) = 3.0 + 0.2 * i;
      out_grid(r, 1) = 3.0 + 0.2 * j;
      out_grid(r, 2) = out_grid(r, 3) = 0.0;
    }
  REQUIRE(ens.disagreement(out_grid) / ens.disagreement(in_grid) > 1.0);
}

namespace {

// one ensemble, trained once, shared by the planning tests that only
// need an accurate linear model
DynamicsEnsemble& trained_linear_ensemble() {
  static DynamicsEnsemble ens = [] {
    Rng data_rng(26);
    const ReplayBuffer data = linear_system_data(2000, 0.8, data_rng, -2.0, 2.0);
    DynamicsEnsemble e({}, Rng(27));
    Rng rng(28);
    e.train_epochs(data, 40, 256, rng);
    return e;
  }();
  return ens;
}

}  // namespace

TEST_CASE("one-step planning steers away from a rising risk field") {
  DynamicsEnsemble& ens = trained_linear_ensemble();
  SafetyCritic critic = planted_critic(0, 2.0);  // risk grows with the state x coordinate
  MpcConfig cfg;
  cfg.horizon = 1;
  cfg.population = 100;
  cfg.elites = 10;
  cfg.iterations = 3;

  // brute-force 1-step argmin over a discretized action grid under the
  // exact dynamics: risk(s0, a) + risk(s0 + 0.8 a, a)
  const Vec2 s0{0.0, 0.0};
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double best = 1e100, best_ax = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double ax = -1.0 + i * 0.05;
    const double score = sig(2.0 * s0[0]) + sig(2.0 * (s0[0] + 0.8 * ax));
    if (score < best) {
      best = score;
      best_ax = ax;
    }
  }
  REQUIRE(best_ax == -1.0);

  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(30 + seed);
    const Vec2 a = mpc_recovery_action(ens, critic, s0, cfg, rng);
    REQUIRE(a[0] < -0.5);
    REQUIRE(std::abs(a[0]) <= 1.0);
    REQUIRE(std::abs(a[1]) <= 1.0);
  }
}

TEST_CASE("degenerate all-elite planning still returns an in-box action") {
  DynamicsEnsemble& ens = trained_linear_ensemble();
  SafetyCritic critic = planted_critic(0, 1.0);
  MpcConfig cfg;
  cfg.horizon = 3;
  cfg.population = 30;
  cfg.elites = 30;
  cfg.iterations = 2;
  Rng rng(37);
  const Vec2 a = mpc_recovery_action(ens, critic, {0.5, -0.5}, cfg, rng);
  REQUIRE(std::abs(a[0]) <= 1.0);
  REQUIRE(std::abs(a[1]) <= 1.0);
}

TEST_CASE("planning rejects a zero horizon") {
  DynamicsEnsemble ens({}, Rng(38));
  SafetyCritic critic = planted_critic(0, 1.0);
  MpcConfig cfg;
  cfg.horizon = 0;
  Rng rng(39);
  REQUIRE_THROWS_AS(mpc_recovery_action(ens, critic, {0.0, 0.0}, cfg, rng), std::invalid_argument);
}

TEST_CASE("planning is deterministic in the seed") {
  DynamicsEnsemble& ens = trained_linear_ensemble();
  SafetyCritic critic = planted_critic(1, 1.5);
  MpcConfig cfg;
  cfg.horizon = 4;
  cfg.population = 60;
  cfg.elites = 8;
  cfg.iterations = 3;
  Rng ra(41), rb(41);
  const Vec2 a = mpc_recovery_action(ens, critic, {0.3, 0.8}, cfg, ra);
  const Vec2 b = mpc_recovery_action(ens, critic, {0.3, 0.8}, cfg, rb);
  REQUIRE(a[0] == b[0]);
  REQUIRE(a[1] == b[1]);
}

TEST_CASE("elite scores never rise across planning iterations") {
  DynamicsEnsemble& ens = trained_linear_ensemble();
  SafetyCritic critic = planted_critic(0, 1.0);
  MpcConfig cfg;
  cfg.horizon = 5;
  cfg.population = 80;
  cfg.elites = 12;
  cfg.iterations = 5;
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(50 + seed);
    MpcDiagnostics diag;
    mpc_recovery_action(ens, critic, {0.2 * seed - 0.8, 0.4}, cfg, rng, &diag);
    REQUIRE(diag.elite_mean_scores.size() == 5);
    for (size_t j = 1; j < diag.elite_mean_scores.size(); ++j)
      REQUIRE(diag.elite_mean_scores[j] <= diag.elite_mean_scores[j - 1]);
    REQUIRE(diag.returned_score <= diag.initial_mean_score);
  }
}

TEST_CASE("zero pretraining steps and epochs change nothing") {
  SafetyCritic critic({}, Rng(60));
  SafetyCritic critic_ref({}, Rng(60));
  ModelFreeRecovery rec({}, Rng(61));
  ModelFreeRecovery rec_ref({}, Rng(61));
  DynamicsEnsemble ens({}, Rng(62));
  DynamicsEnsemble ens_ref({}, Rng(62));
  ReplayBuffer buf;
  Rng gen(63);
  for (int i = 0; i < 50; ++i) {
    Transition t;
    t.s = {gen.normal(), gen.normal()};
    t.a = t.a_task = {0.1, -0.1};
    t.sn = {gen.normal(), gen.normal()};
    buf.push(t);
  }
  Rng rng(64);
  pretrain_mf_recovery(critic, rec, buf, 0, 32, rng);
  pretrain_mb_recovery(critic, ens, buf, 0, 32, 0, 32, rng);
  REQUIRE(nets_equal(critic.twin1(), critic_ref.twin1()));
  REQUIRE(nets_equal(critic.twin2(), critic_ref.twin2()));
  REQUIRE(nets_equal(rec.actor(), rec_ref.actor()));
  for (int k = 0; k < 5; ++k) REQUIRE(nets_equal(ens.member(k), ens_ref.member(k)));

  ReplayBuffer empty;
  REQUIRE_THROWS_AS(pretrain_mf_recovery(critic, rec, empty, 10, 32, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(pretrain_mb_recovery(critic, ens, empty, 10, 32, 1, 32, rng),
                    std::invalid_argument);
}

TEST_CASE("pretraining is bitwise deterministic in the seed") {
  ReplayBuffer buf;
  Rng gen(70);
  for (int i = 0; i < 300; ++i) {
    Transition t;
    t.s = {gen.normal(), gen.normal()};
    t.a = t.a_task = {gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0)};
    t.sn = {t.s[0] + 0.8 * t.a[0] + gen.normal(0.0, 0.05),
            t.s[1] + 0.8 * t.a[1] + gen.normal(0.0, 0.05)};
    t.c = gen.uniform() < 0.1 ? 1.0 : 0.0;
    t.done = t.c > 0.5;
    buf.push(t);
  }
  SafetyCritic ca({}, Rng(71)), cb({}, Rng(71));
  ModelFreeRecovery ra({}, Rng(72)), rb({}, Rng(72));
  Rng sa(73), sb(73);
  pretrain_mf_recovery(ca, ra, buf, 40, 64, sa);
  pretrain_mf_recovery(cb, rb, buf, 40, 64, sb);
  REQUIRE(nets_equal(ca.twin1(), cb.twin1()));
  REQUIRE(nets_equal(ca.twin2(), cb.twin2()));
  REQUIRE(nets_equal(ra.actor(), rb.actor()));

  DynamicsEnsemble ea({}, Rng(74)), eb({}, Rng(74));
  SafetyCritic cma({}, Rng(75)), cmb({}, Rng(75));
  Rng ta(76), tb(76);
  pretrain_mb_recovery(cma, ea, buf, 30, 64, 2, 64, ta);
  pretrain_mb_recovery(cmb, eb, buf, 30, 64, 2, 64, tb);
  for (int k = 0; k < 5; ++k) REQUIRE(nets_equal(ea.member(k), eb.member(k)));
  REQUIRE(nets_equal(cma.twin1(), cmb.twin1()));
}

TEST_CASE("pretrained recovery halves the near-obstacle violation rate") {
  const NavConfig cfg = resolve_env("nav1");
  ConstrainedEnv env(cfg, 80);
  const Dataset data = collect_offline(env, 8000, cfg.collect_noise);
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
  pretrain_mf_recovery(critic, rec, buf, 10000, 1000, train);

  // start states one half-unit off the obstacle boundary
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

  auto violation_rate = [&](bool use_policy, uint64_t seed) {
    ConstrainedEnv roll(cfg, seed);
    Rng act_rng(seed + 1);
    int violations = 0;
    for (const Vec2& s0 : starts) {
      Vec2 s = roll.reset_to(s0);
      for (int t = 0; t < 5; ++t) {
        const Vec2 a = use_policy
                           ? rec.action(s)
                           : Vec2{act_rng.uniform(-1.0, 1.0), act_rng.uniform(-1.0, 1.0)};
        const StepResult r = roll.step(a);
        if (r.c > 0.5) {
          ++violations;
          break;
        }
        if (r.done) break;
        s = r.next;
      }
    }
    return violations / 100.0;
  };

  const double rec_rate = violation_rate(true, 90);
  const double rnd_rate = violation_rate(false, 91);
  REQUIRE(rnd_rate > 0.2);  // the comparison must be exercised
  REQUIRE(rec_rate <= 0.5 * rnd_rate);
}
