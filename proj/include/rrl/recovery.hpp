#pragma once
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "rrl/adam.hpp"
#include "rrl/mlp.hpp"
#include "rrl/replay.hpp"
#include "rrl/safety_critic.hpp"
#include "rrl/serialize.hpp"

namespace rrl {

struct MfRecoveryConfig {
  int state_dim = 2;
  int action_dim = 2;
  std::vector<int> hidden = {32, 32};
  double lr = 3e-4;
  double action_scale = 1.0;
  double sat_penalty = 1e-3;  // L2 on pre-squash outputs; 0 disables
  std::vector<double> state_shift, state_scale;  // empty = raw state inputs
};

// Deterministic recovery actor descending the safety critic.
class ModelFreeRecovery {
 public:
  ModelFreeRecovery(MfRecoveryConfig cfg, Rng init_rng) : cfg_(std::move(cfg)) {
    std::vector<int> dims{cfg_.state_dim};
    for (int h : cfg_.hidden) dims.push_back(h);
    dims.push_back(cfg_.action_dim);
    actor_ = Mlp(dims, Act::Relu, Act::Tanh);
    actor_.init(init_rng);
    apply_state_action_norm(actor_, cfg_.state_shift, cfg_.state_scale);
    // small head keeps tanh unsaturated early so gradients can shape
    // the action before the output reaches the box boundary
    for (auto& v : actor_.w.back().a) v *= 0.01;
    opt_ = AdamState(cfg_.lr);
    opt_.match(actor_);
    g_.match(actor_);
  }

  const MfRecoveryConfig& config() const { return cfg_; }
  Mlp& actor() { return actor_; }

  Vec2 action(Vec2 s) {
    Matrix st(1, cfg_.state_dim);
    st(0, 0) = s[0];
    st(0, 1) = s[1];
    forward(actor_, st, eval_);
    return {cfg_.action_scale * output_of(eval_)(0, 0), cfg_.action_scale * output_of(eval_)(0, 1)};
  }

  void actions_batch(const Matrix& states, Matrix& out) {
    forward(actor_, states, eval_);
    const Matrix& y = output_of(eval_);
    out.reshape(states.rows, cfg_.action_dim);
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = cfg_.action_scale * y.a[i];
  }

  // Loss = mean over states of fn's value at (s, pi(s)), plus an L2
  // penalty on pre-squash outputs that keeps the tanh head responsive.
  double loss_and_grads(const Matrix& states, const ValueGradFn& fn, MlpGrads& g) {
    const int B = states.rows;
    forward(actor_, states, cache_);
    const Matrix& y = output_of(cache_);
    act_.reshape(B, cfg_.action_dim);
    for (size_t i = 0; i < act_.a.size(); ++i) act_.a[i] = cfg_.action_scale * y.a[i];
    fn(states, act_, v_, dvda_);
    double loss = 0.0;
    for (double v : v_) loss += v;
    dy_.reshape(B, cfg_.action_dim);
    const Matrix& u = cache_.z.back();
    for (size_t i = 0; i < dy_.a.size(); ++i) {
      // penalty gradient injected through the inverse of tanh's local
      // slope so backward() lands it on the pre-squash output exactly
      const double slope = std::max(1.0 - y.a[i] * y.a[i], 1e-12);
      dy_.a[i] = (dvda_.a[i] * cfg_.action_scale + cfg_.sat_penalty * u.a[i] / slope) / B;
      loss += 0.5 * cfg_.sat_penalty * u.a[i] * u.a[i];
    }
    g.zero();
    backward(actor_, cache_, dy_, g);
    return loss / B;
  }

  double update_with(const Matrix& states, const ValueGradFn& fn) {
    const double loss = loss_and_grads(states, fn, g_);
    adam_step(actor_, g_, opt_);
    return loss;
  }

  // One step down the mean max-twin risk of the actor's own actions.
  double update(const std::vector<const Transition*>& batch, SafetyCritic& critic) {
    if (batch.empty()) throw std::invalid_argument("recovery update: empty batch");
    const int B = static_cast<int>(batch.size());
    st_.reshape(B, cfg_.state_dim);
    for (int i = 0; i < B; ++i) {
      st_(i, 0) = batch[i]->s[0];
      st_(i, 1) = batch[i]->s[1];
    }
    return update_with(st_, [&critic](const Matrix& s, const Matrix& a, std::vector<double>& v,
                                      Matrix& dv) { critic.qrisk_action_grad(s, a, v, dv); });
  }

  // Deterministic successor actions for critic backups.
  SuccessorFn successor_fn() {
    return [this](const Matrix& sn, Matrix& an, Rng&) { actions_batch(sn, an); };
  }

  void save(const std::string& prefix) const { save_net(actor_, prefix + "recovery_actor.rrlnet"); }
  void load(const std::string& prefix) {
    actor_ = load_net(prefix + "recovery_actor.rrlnet");
    opt_.match(actor_);
    g_.match(actor_);
  }

 private:
  MfRecoveryConfig cfg_;
  Mlp actor_;
  AdamState opt_;
  MlpGrads g_;
  MlpCache cache_, eval_;
  Matrix st_, act_, dy_, dvda_;
  std::vector<double> v_;
};

struct DynamicsConfig {
  int state_dim = 2;
  int action_dim = 2;
  std::vector<int> hidden = {32, 32, 32};
  int members = 5;
  double lr = 3e-4;
  double logvar_min = -10.0;
  double logvar_max = 4.0;
  std::vector<double> state_shift, state_scale;  // empty = raw state inputs
};

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Probabilistic ensemble predicting state deltas with heteroscedastic
// Gaussian heads; log-variance soft-clamped into a finite band.
class DynamicsEnsemble {
 public:
  DynamicsEnsemble(DynamicsConfig cfg, Rng init_rng) : cfg_(std::move(cfg)) {
    if (cfg_.members < 1) throw std::invalid_argument("dynamics: need at least one member");
    std::vector<int> dims{cfg_.state_dim + cfg_.action_dim};
    for (int h : cfg_.hidden) dims.push_back(h);
    dims.push_back(2 * cfg_.state_dim);
    for (int k = 0; k < cfg_.members; ++k) {
      nets_.emplace_back(dims, Act::Swish, Act::Identity);
      nets_.back().init(init_rng);
      apply_state_action_norm(nets_.back(), cfg_.state_shift, cfg_.state_scale);
      opts_.emplace_back(cfg_.lr);
      opts_.back().match(nets_.back());
      grads_.emplace_back();
      grads_.back().match(nets_.back());
    }
    caches_.resize(cfg_.members);
  }

  const DynamicsConfig& config() const { return cfg_; }
  int members() const { return cfg_.members; }
  Mlp& member(int k) { return nets_.at(k); }

  // Twice-softplus clamp keeps the log-variance in (logvar_min, logvar_max).
  double clamp_logvar(double raw, double* dclamp = nullptr) const {
    const double u = cfg_.logvar_max - raw;
    const double t1 = cfg_.logvar_max - softplus(u);
    const double v = t1 - cfg_.logvar_min;
    const double lv = cfg_.logvar_min + softplus(v);
    if (dclamp) *dclamp = stable_sigmoid(u) * stable_sigmoid(v);
    return lv;
  }

  // Per-member predictive Gaussian over deltas for packed (s, a) rows.
  void predict(int k, const Matrix& sa, Matrix& mean, Matrix& logvar) {
    forward(nets_.at(k), sa, caches_[k]);
    const Matrix& out = output_of(caches_[k]);
    const int B = sa.rows, sd = cfg_.state_dim;
    mean.reshape(B, sd);
    logvar.reshape(B, sd);
    for (int i = 0; i < B; ++i)
      for (int d = 0; d < sd; ++d) {
        mean(i, d) = out(i, d);
        logvar(i, d) = clamp_logvar(out(i, sd + d));
      }
  }

  // Mean over members of the member-mean delta prediction.
  void ensemble_mean(const Matrix& sa, Matrix& mean) {
    const int B = sa.rows, sd = cfg_.state_dim;
    mean.reshape(B, sd);
    mean.zero();
    Matrix m, lv;
    for (int k = 0; k < cfg_.members; ++k) {
      predict(k, sa, m, lv);
      for (size_t i = 0; i < mean.a.size(); ++i) mean.a[i] += m.a[i] / cfg_.members;
    }
  }

  // Variance across member means, averaged over rows and dims.
  double disagreement(const Matrix& sa) {
    const int B = sa.rows, sd = cfg_.state_dim;
    std::vector<Matrix> means(cfg_.members);
    Matrix lv;
    for (int k = 0; k < cfg_.members; ++k) predict(k, sa, means[k], lv);
    double total = 0.0;
    for (int i = 0; i < B; ++i)
      for (int d = 0; d < sd; ++d) {
        double mu = 0.0;
        for (int k = 0; k < cfg_.members; ++k) mu += means[k](i, d) / cfg_.members;
        double var = 0.0;
        for (int k = 0; k < cfg_.members; ++k) {
          const double dd = means[k](i, d) - mu;
          var += dd * dd / cfg_.members;
        }
        total += var;
      }
    return total / (B * sd);
  }

  // Mean Gaussian NLL of the deltas under member k, with gradients.
  double member_nll_and_grads(int k, const Matrix& sa, const Matrix& delta, MlpGrads& g) {
    if (sa.rows == 0) throw std::invalid_argument("dynamics: empty batch");
    Mlp& net = nets_.at(k);
    forward(net, sa, caches_[k]);
    const Matrix& out = output_of(caches_[k]);
    const int B = sa.rows, sd = cfg_.state_dim;
    dy_.reshape(B, 2 * sd);
    double loss = 0.0;
    for (int i = 0; i < B; ++i)
      for (int d = 0; d < sd; ++d) {
        const double mu = out(i, d);
        double dcl;
        const double lv = clamp_logvar(out(i, sd + d), &dcl);
        const double inv = std::exp(-lv);
        const double r = delta(i, d) - mu;
        loss += 0.5 * (r * r * inv + lv + std::log(2.0 * 3.14159265358979323846));
        dy_(i, d) = -r * inv / B;
        dy_(i, sd + d) = 0.5 * (1.0 - r * r * inv) * dcl / B;
      }
    g.zero();
    backward(net, caches_[k], dy_, g);
    return loss / B;
  }

  // One NLL step per member on its own bootstrapped batch.
  double update(const ReplayBuffer& data, int batch_size, Rng& rng) {
    if (data.empty()) throw std::invalid_argument("dynamics: empty buffer");
    double mean_loss = 0.0;
    for (int k = 0; k < cfg_.members; ++k) {
      const auto batch = data.sample(batch_size, rng);
      const int B = static_cast<int>(batch.size());
      sa_.reshape(B, cfg_.state_dim + cfg_.action_dim);
      delta_.reshape(B, cfg_.state_dim);
      for (int i = 0; i < B; ++i) {
        sa_(i, 0) = batch[i]->s[0];
        sa_(i, 1) = batch[i]->s[1];
        sa_(i, 2) = batch[i]->a[0];
        sa_(i, 3) = batch[i]->a[1];
        delta_(i, 0) = batch[i]->sn[0] - batch[i]->s[0];
        delta_(i, 1) = batch[i]->sn[1] - batch[i]->s[1];
      }
      mean_loss += member_nll_and_grads(k, sa_, delta_, grads_[k]);
      adam_step(nets_[k], grads_[k], opts_[k]);
    }
    return mean_loss / cfg_.members;
  }

  double train_epochs(const ReplayBuffer& data, int epochs, int batch_size, Rng& rng) {
    const int batches_per_epoch =
        static_cast<int>((data.size() + batch_size - 1) / std::max(1, batch_size));
    double last = 0.0;
    for (int e = 0; e < epochs; ++e)
      for (int b = 0; b < batches_per_epoch; ++b) last = update(data, batch_size, rng);
    return last;
  }

  void save(const std::string& prefix) const {
    for (int k = 0; k < cfg_.members; ++k)
      save_net(nets_[k], prefix + "dyn_" + std::to_string(k) + ".rrlnet");
  }
  void load(const std::string& prefix) {
    for (int k = 0; k < cfg_.members; ++k) {
      nets_[k] = load_net(prefix + "dyn_" + std::to_string(k) + ".rrlnet");
      opts_[k].match(nets_[k]);
      grads_[k].match(nets_[k]);
    }
  }

 private:
  DynamicsConfig cfg_;
  std::vector<Mlp> nets_;
  std::vector<AdamState> opts_;
  std::vector<MlpGrads> grads_;
  std::vector<MlpCache> caches_;
  Matrix sa_, delta_, dy_;
};

struct MpcConfig {
  int horizon = 5;
  int population = 400;
  int elites = 40;
  int iterations = 5;
  int particles = 4;
  double action_scale = 1.0;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("mpc: horizon must be at least 1");
    if (population < 1 || elites < 1 || iterations < 1 || particles < 1)
      throw std::invalid_argument("mpc: population, elites, iterations, particles must be positive");
    if (elites > population) throw std::invalid_argument("mpc: elites exceed population");
  }
};

struct MpcDiagnostics {
  std::vector<double> elite_mean_scores;  // one entry per iteration
  double initial_mean_score = 0.0;
  double returned_score = 0.0;
};

// Cross-entropy-method plan search over the ensemble, scored by the
// summed safety critic risk along predicted rollouts. Each particle
// commits to one member and one noise path for the whole call, so the
// score is a fixed function of the plan and elite retention makes the
// elite-mean score non-increasing across iterations.
inline Vec2 mpc_recovery_action(DynamicsEnsemble& ens, SafetyCritic& critic, Vec2 s,
                                const MpcConfig& cfg, Rng& rng, MpcDiagnostics* diag = nullptr) {
  cfg.validate();
  const int H = cfg.horizon, P = cfg.particles, ad = 2, sd = 2;
  const double S = cfg.action_scale;
  const int plan_len = H * ad;

  std::vector<int> member(P);
  for (int p = 0; p < P; ++p) member[p] = static_cast<int>(rng.uniform_int(ens.members()));
  // common noise paths: scoring stays deterministic within this call
  std::vector<double> eps(static_cast<size_t>(P) * H * sd);
  for (auto& e : eps) e = rng.normal();

  // plans laid out row-per-candidate; scores averaged over particles
  const int C = 1 + cfg.elites + cfg.population;
  Matrix plans(C, plan_len);
  std::vector<double> scores(C);
  Matrix states, sa, mean, logvar;
  std::vector<double> q;

  auto score_all = [&](int count) {
    for (int c = 0; c < count; ++c) scores[c] = 0.0;
    for (int p = 0; p < P; ++p) {
      states.reshape(count, sd);
      for (int c = 0; c < count; ++c) {
        states(c, 0) = s[0];
        states(c, 1) = s[1];
      }
      for (int i = 0; i <= H; ++i) {
        const int ai = std::min(i, H - 1);  // terminal state scored with the last action
        sa.reshape(count, sd + ad);
        for (int c = 0; c < count; ++c) {
          sa(c, 0) = states(c, 0);
          sa(c, 1) = states(c, 1);
          sa(c, 2) = plans(c, ai * ad);
          sa(c, 3) = plans(c, ai * ad + 1);
        }
        critic.qrisk_batch(sa, q);
        for (int c = 0; c < count; ++c) scores[c] += q[c] / P;
        if (i == H) break;
        ens.predict(member[p], sa, mean, logvar);
        for (int c = 0; c < count; ++c)
          for (int d = 0; d < sd; ++d)
            states(c, d) += mean(c, d) +
                            std::exp(0.5 * logvar(c, d)) *
                                eps[(static_cast<size_t>(p) * H + i) * sd + d];
      }
    }
  };

  std::vector<double> mu(plan_len, 0.0), sig(plan_len, S);
  std::vector<int> order(C);
  Matrix elites(cfg.elites, plan_len);
  int have_elites = 0;
  double best_score = 0.0;
  std::vector<double> best_plan(plan_len, 0.0);
  bool have_best = false;

  for (int it = 0; it < cfg.iterations; ++it) {
    int c = 0;
    for (int j = 0; j < plan_len; ++j) plans(c, j) = std::clamp(mu[j], -S, S);
    ++c;
    for (int e = 0; e < have_elites; ++e, ++c)
      for (int j = 0; j < plan_len; ++j) plans(c, j) = elites(e, j);
    for (int k = 0; k < cfg.population; ++k, ++c)
      for (int j = 0; j < plan_len; ++j)
        plans(c, j) = std::clamp(mu[j] + sig[j] * rng.normal(), -S, S);
    const int count = c;

    score_all(count);
    if (it == 0 && diag) diag->initial_mean_score = scores[0];
    order.resize(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return scores[x] < scores[y]; });

    const int ne = std::min(cfg.elites, count);
    double elite_mean = 0.0;
    for (int e = 0; e < ne; ++e) {
      for (int j = 0; j < plan_len; ++j) elites(e, j) = plans(order[e], j);
      elite_mean += scores[order[e]] / ne;
    }
    have_elites = ne;
    if (diag) diag->elite_mean_scores.push_back(elite_mean);
    if (!have_best || scores[order[0]] < best_score) {
      best_score = scores[order[0]];
      for (int j = 0; j < plan_len; ++j) best_plan[j] = plans(order[0], j);
      have_best = true;
    }

    // momentum-free soft refit of the sampling distribution
    for (int j = 0; j < plan_len; ++j) {
      double em = 0.0, ev = 0.0;
      for (int e = 0; e < ne; ++e) em += elites(e, j) / ne;
      for (int e = 0; e < ne; ++e) {
        const double d = elites(e, j) - em;
        ev += d * d / ne;
      }
      mu[j] = 0.25 * mu[j] + 0.75 * em;
      sig[j] = 0.25 * sig[j] + 0.75 * std::sqrt(ev);
    }
  }

  if (diag) diag->returned_score = best_score;
  return {std::clamp(best_plan[0], -S, S), std::clamp(best_plan[1], -S, S)};
}

// Offline initialization. Model-free recovery interleaves a critic
// step and an actor step on each batch; model-based training fits the
// ensemble for full epochs, with the critic trained separately. Both
// back critic targets up through the recorded successor actions, which
// keeps target queries on the support of the dataset.
inline void pretrain_mf_recovery(SafetyCritic& critic, ModelFreeRecovery& rec,
                                 const ReplayBuffer& offline, int steps, int batch_size, Rng& rng) {
  if (offline.empty()) throw std::invalid_argument("recovery pretraining: empty offline buffer");
  for (int i = 0; i < steps; ++i) {
    const auto batch = offline.sample(batch_size, rng);
    critic.update_offline(batch);
    rec.update(batch, critic);
  }
}

inline void pretrain_mb_recovery(SafetyCritic& critic, DynamicsEnsemble& ens,
                                 const ReplayBuffer& offline, int critic_steps, int critic_batch,
                                 int dyn_epochs, int dyn_batch, Rng& rng) {
  if (offline.empty()) throw std::invalid_argument("recovery pretraining: empty offline buffer");
  ens.train_epochs(offline, dyn_epochs, dyn_batch, rng);
  critic.pretrain(offline, critic_steps, critic_batch, rng);
}

}  // namespace rrl
