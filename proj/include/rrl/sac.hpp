#pragma once
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rrl/adam.hpp"
#include "rrl/mlp.hpp"
#include "rrl/replay.hpp"
#include "rrl/safety_critic.hpp"
#include "rrl/serialize.hpp"
#include "rrl/target.hpp"

namespace rrl {

// The actor objective's non-entropy term is a ValueGradFn: plain SAC
// uses v = -min twin Q; constrained variants add penalties.

struct SacConfig {
  int state_dim = 2;
  int action_dim = 2;
  std::vector<int> hidden = {32, 32};
  double gamma = 0.99;
  double alpha = 0.2;  // fixed, never adapted online
  double lr = 3e-4;
  double tau = 0.005;
  double action_scale = 1.0;
  std::vector<double> state_shift, state_scale;  // empty = raw state inputs
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEps = 1e-6;

// Soft actor-critic with a squashed-Gaussian actor and twin critics
// under min-pessimism. The actor net emits means then raw log-stds.
class SacAgent {
 public:
  SacAgent(SacConfig cfg, Rng init_rng) : cfg_(std::move(cfg)) {
    std::vector<int> adims{cfg_.state_dim};
    for (int h : cfg_.hidden) adims.push_back(h);
    adims.push_back(2 * cfg_.action_dim);
    actor_ = Mlp(adims, Act::Relu, Act::Identity);
    actor_.init(init_rng);
    apply_state_action_norm(actor_, cfg_.state_shift, cfg_.state_scale);

    std::vector<int> qdims{cfg_.state_dim + cfg_.action_dim};
    for (int h : cfg_.hidden) qdims.push_back(h);
    qdims.push_back(1);
    Mlp q1(qdims, Act::Relu, Act::Identity), q2(qdims, Act::Relu, Act::Identity);
    q1.init(init_rng);
    q2.init(init_rng);
    apply_state_action_norm(q1, cfg_.state_shift, cfg_.state_scale);
    apply_state_action_norm(q2, cfg_.state_shift, cfg_.state_scale);
    qa_ = TargetPair(std::move(q1), cfg_.tau);
    qb_ = TargetPair(std::move(q2), cfg_.tau);

    actor_opt_ = AdamState(cfg_.lr);
    qa_opt_ = AdamState(cfg_.lr);
    qb_opt_ = AdamState(cfg_.lr);
    actor_opt_.match(actor_);
    qa_opt_.match(qa_.live);
    qb_opt_.match(qb_.live);
    ga_.match(actor_);
    g1_.match(qa_.live);
    g2_.match(qb_.live);
  }

  const SacConfig& config() const { return cfg_; }
  double alpha() const { return cfg_.alpha; }
  Mlp& actor() { return actor_; }
  Mlp& critic1() { return qa_.live; }
  Mlp& critic2() { return qb_.live; }
  const Mlp& target1() const { return qa_.target; }
  const Mlp& target2() const { return qb_.target; }
  void sync_targets() {
    qa_.hard_sync();
    qb_.hard_sync();
  }

  // Reparameterized draw: a = scale * tanh(mu + sigma z), z ~ N(0,I).
  // Log-prob includes the tanh change of variables.
  Vec2 sample_action(Vec2 s, Rng& rng, double* logp = nullptr) {
    Matrix st(1, cfg_.state_dim);
    st(0, 0) = s[0];
    st(0, 1) = s[1];
    Matrix z(1, cfg_.action_dim);
    for (auto& v : z.a) v = rng.normal();
    Matrix actions;
    std::vector<double> lp;
    sample_actions_batch(st, z, actions, lp);
    if (logp) *logp = lp[0];
    return {actions(0, 0), actions(0, 1)};
  }

  // Batched reparameterized sampling with fixed noise z.
  void sample_actions_batch(const Matrix& states, const Matrix& z, Matrix& actions,
                            std::vector<double>& logp) {
    forward(actor_, states, actor_eval_);
    const Matrix& out = output_of(actor_eval_);
    const int B = states.rows, ad = cfg_.action_dim;
    const double S = cfg_.action_scale;
    actions.reshape(B, ad);
    logp.assign(B, 0.0);
    for (int i = 0; i < B; ++i) {
      for (int d = 0; d < ad; ++d) {
        const double mu = out(i, d);
        const double lraw = out(i, ad + d);
        const double lcl = std::clamp(lraw, kLogStdMin, kLogStdMax);
        const double sigma = std::exp(lcl);
        const double u = mu + sigma * z(i, d);
        const double t = std::tanh(u);
        actions(i, d) = S * t;
        logp[i] += -0.5 * z(i, d) * z(i, d) - lcl - 0.5 * std::log(2.0 * 3.14159265358979323846) -
                   std::log(S * (1.0 - t * t) + kTanhEps);
      }
    }
  }

  // Density of a given action under the current policy at s.
  double log_prob(Vec2 s, Vec2 a) {
    Matrix st(1, cfg_.state_dim);
    st(0, 0) = s[0];
    st(0, 1) = s[1];
    forward(actor_, st, actor_eval_);
    const Matrix& out = output_of(actor_eval_);
    const double S = cfg_.action_scale;
    double lp = 0.0;
    for (int d = 0; d < cfg_.action_dim; ++d) {
      const double mu = out(0, d);
      const double lcl = std::clamp(out(0, cfg_.action_dim + d), kLogStdMin, kLogStdMax);
      const double sigma = std::exp(lcl);
      const double t = a[d] / S;
      const double u = 0.5 * std::log((1.0 + t) / (1.0 - t));  // atanh
      const double zz = (u - mu) / sigma;
      lp += -0.5 * zz * zz - lcl - 0.5 * std::log(2.0 * 3.14159265358979323846) -
            std::log(S * (1.0 - t * t) + kTanhEps);
    }
    return lp;
  }

  // Critic targets: y = r + gamma (1-done)(min target Q(s',a') - alpha log pi(a'|s')).
  std::vector<double> critic_targets(const std::vector<const Transition*>& batch, Rng& rng) {
    const int B = static_cast<int>(batch.size());
    sn_.reshape(B, cfg_.state_dim);
    for (int i = 0; i < B; ++i) {
      sn_(i, 0) = batch[i]->sn[0];
      sn_(i, 1) = batch[i]->sn[1];
    }
    zbuf_.reshape(B, cfg_.action_dim);
    for (auto& v : zbuf_.a) v = rng.normal();
    std::vector<double> lp;
    sample_actions_batch(sn_, zbuf_, anext_, lp);
    sa_.reshape(B, cfg_.state_dim + cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      sa_(i, 0) = sn_(i, 0);
      sa_(i, 1) = sn_(i, 1);
      for (int d = 0; d < cfg_.action_dim; ++d) sa_(i, cfg_.state_dim + d) = anext_(i, d);
    }
    forward(qa_.target, sa_, qe1_);
    forward(qb_.target, sa_, qe2_);
    std::vector<double> y(B);
    for (int i = 0; i < B; ++i) {
      const double qmin = std::min(output_of(qe1_)(i, 0), output_of(qe2_)(i, 0));
      const double mask = batch[i]->done ? 0.0 : 1.0;
      y[i] = batch[i]->r + cfg_.gamma * mask * (qmin - cfg_.alpha * lp[i]);
    }
    return y;
  }

  double critic_loss_and_grads(const Matrix& sa, const std::vector<double>& y, MlpGrads& g1,
                               MlpGrads& g2) {
    const int B = sa.rows;
    forward(qa_.live, sa, qc1_);
    forward(qb_.live, sa, qc2_);
    dy1_.reshape(B, 1);
    dy2_.reshape(B, 1);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
      const double r1 = output_of(qc1_)(i, 0) - y[i];
      const double r2 = output_of(qc2_)(i, 0) - y[i];
      loss += 0.5 * (r1 * r1 + r2 * r2);
      dy1_(i, 0) = r1 / B;
      dy2_(i, 0) = r2 / B;
    }
    g1.zero();
    g2.zero();
    backward(qa_.live, qc1_, dy1_, g1);
    backward(qb_.live, qc2_, dy2_, g2);
    return loss / B;
  }

  double critic_update(const std::vector<const Transition*>& batch, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("task critic update: empty batch");
    const int B = static_cast<int>(batch.size());
    const std::vector<double> y = critic_targets(batch, rng);
    sa_.reshape(B, cfg_.state_dim + cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      sa_(i, 0) = batch[i]->s[0];
      sa_(i, 1) = batch[i]->s[1];
      for (int d = 0; d < cfg_.action_dim; ++d) sa_(i, cfg_.state_dim + d) = batch[i]->a_task[d];
    }
    const double loss = critic_loss_and_grads(sa_, y, g1_, g2_);
    adam_step(qa_.live, g1_, qa_opt_);
    adam_step(qb_.live, g2_, qb_opt_);
    qa_.polyak();
    qb_.polyak();
    return loss;
  }

  // Min of the live twins with gradient wrt the action through the
  // per-sample active twin.
  void qmin_action_grad(const Matrix& states, const Matrix& actions, std::vector<double>& q,
                        Matrix& dq_da) {
    const int B = states.rows;
    sa_.reshape(B, cfg_.state_dim + cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      sa_(i, 0) = states(i, 0);
      sa_(i, 1) = states(i, 1);
      for (int d = 0; d < cfg_.action_dim; ++d) sa_(i, cfg_.state_dim + d) = actions(i, d);
    }
    forward(qa_.live, sa_, qc1_);
    forward(qb_.live, sa_, qc2_);
    q.resize(B);
    dy1_.reshape(B, 1);
    dy2_.reshape(B, 1);
    for (int i = 0; i < B; ++i) {
      const double v1 = output_of(qc1_)(i, 0), v2 = output_of(qc2_)(i, 0);
      const bool first = v1 <= v2;
      q[i] = first ? v1 : v2;
      dy1_(i, 0) = first ? 1.0 : 0.0;
      dy2_(i, 0) = first ? 0.0 : 1.0;
    }
    scratch1_.match(qa_.live);
    scratch2_.match(qb_.live);
    scratch1_.zero();
    scratch2_.zero();
    backward(qa_.live, qc1_, dy1_, scratch1_, &dxa_);
    backward(qb_.live, qc2_, dy2_, scratch2_, &dxb_);
    dq_da.reshape(B, cfg_.action_dim);
    for (int i = 0; i < B; ++i)
      for (int d = 0; d < cfg_.action_dim; ++d)
        dq_da(i, d) = dxa_(i, cfg_.state_dim + d) + dxb_(i, cfg_.state_dim + d);
  }

  // Actor loss on fixed noise: mean over the batch of
  //   alpha log pi(a|s) + v(s, a),   a = scale tanh(mu + sigma z).
  // vfn supplies v and dv/da; the default SAC choice is -min twin Q.
  double actor_loss_and_grads(const Matrix& states, const Matrix& z, const ValueGradFn& vfn,
                              MlpGrads& g) {
    const int B = states.rows, ad = cfg_.action_dim;
    const double S = cfg_.action_scale, alpha = cfg_.alpha;
    forward(actor_, states, actor_cache_);
    const Matrix& out = output_of(actor_cache_);
    act_.reshape(B, ad);
    // per-dim intermediates reused when assembling the output gradient
    tbuf_.reshape(B, ad);
    sgbuf_.reshape(B, ad);
    double entropy_loss = 0.0;
    for (int i = 0; i < B; ++i) {
      for (int d = 0; d < ad; ++d) {
        const double mu = out(i, d);
        const double lraw = out(i, ad + d);
        const double lcl = std::clamp(lraw, kLogStdMin, kLogStdMax);
        const double sigma = std::exp(lcl);
        const double u = mu + sigma * z(i, d);
        const double t = std::tanh(u);
        act_(i, d) = S * t;
        tbuf_(i, d) = t;
        sgbuf_(i, d) = sigma;
        entropy_loss += alpha * (-0.5 * z(i, d) * z(i, d) - lcl -
                                 0.5 * std::log(2.0 * 3.14159265358979323846) -
                                 std::log(S * (1.0 - t * t) + kTanhEps));
      }
    }
    vfn(states, act_, vbuf_, dvda_);
    double vloss = 0.0;
    for (double v : vbuf_) vloss += v;

    dact_.reshape(B, 2 * ad);
    for (int i = 0; i < B; ++i) {
      for (int d = 0; d < ad; ++d) {
        const double t = tbuf_(i, d);
        const double sigma = sgbuf_(i, d);
        const double omt2 = 1.0 - t * t;
        const double dlp_du = 2.0 * S * t * omt2 / (S * omt2 + kTanhEps);
        const double da_du = S * omt2;
        const double common = alpha * dlp_du + dvda_(i, d) * da_du;
        dact_(i, d) = common / B;
        const double lraw = out(i, ad + d);
        const bool open = lraw > kLogStdMin && lraw < kLogStdMax;
        dact_(i, ad + d) = open ? (-alpha + common * sigma * z(i, d)) / B : 0.0;
      }
    }
    g.zero();
    backward(actor_, actor_cache_, dact_, g);
    return (entropy_loss + vloss) / B;
  }

  double actor_step_with(const Matrix& states, const Matrix& z, const ValueGradFn& vfn) {
    const double loss = actor_loss_and_grads(states, z, vfn, ga_);
    adam_step(actor_, ga_, actor_opt_);
    return loss;
  }

  ValueGradFn default_value_fn() {
    return [this](const Matrix& st, const Matrix& at, std::vector<double>& v, Matrix& dv) {
      qmin_action_grad(st, at, v, dv);
      for (auto& x : v) x = -x;
      for (auto& x : dv.a) x = -x;
    };
  }

  double actor_update(const std::vector<const Transition*>& batch, Rng& rng) {
    return actor_update_with(batch, rng, default_value_fn());
  }

  double actor_update_with(const std::vector<const Transition*>& batch, Rng& rng,
                           const ValueGradFn& vfn) {
    if (batch.empty()) throw std::invalid_argument("actor update: empty batch");
    const int B = static_cast<int>(batch.size());
    st_.reshape(B, cfg_.state_dim);
    for (int i = 0; i < B; ++i) {
      st_(i, 0) = batch[i]->s[0];
      st_(i, 1) = batch[i]->s[1];
    }
    zbuf_.reshape(B, cfg_.action_dim);
    for (auto& v : zbuf_.a) v = rng.normal();
    return actor_step_with(st_, zbuf_, vfn);
  }

  // Demo-driven initialization: epochs of critic + actor updates over
  // the demo buffer. Navigation tasks ship no demos and skip this.
  void pretrain_task_critic(const ReplayBuffer& demos, int epochs, int batch_size, Rng& rng) {
    if (demos.empty()) throw std::invalid_argument("task pretraining: empty demo set");
    const int batches_per_epoch =
        static_cast<int>((demos.size() + batch_size - 1) / batch_size);
    for (int e = 0; e < epochs; ++e) {
      for (int b = 0; b < batches_per_epoch; ++b) {
        const auto batch = demos.sample(batch_size, rng);
        critic_update(batch, rng);
        actor_update(batch, rng);
      }
    }
  }

  // Successor-action provider for the safety critic's backup.
  SuccessorFn successor_sampler() {
    return [this](const Matrix& sn, Matrix& an, Rng& rng) {
      zs_.reshape(sn.rows, cfg_.action_dim);
      for (auto& v : zs_.a) v = rng.normal();
      std::vector<double> lp;
      sample_actions_batch(sn, zs_, an, lp);
    };
  }

  void save(const std::string& prefix) const {
    save_net(actor_, prefix + "task_actor.rrlnet");
    save_net(qa_.live, prefix + "task_q1.rrlnet");
    save_net(qb_.live, prefix + "task_q2.rrlnet");
    save_net(qa_.target, prefix + "task_q1_target.rrlnet");
    save_net(qb_.target, prefix + "task_q2_target.rrlnet");
  }
  void load(const std::string& prefix) {
    actor_ = load_net(prefix + "task_actor.rrlnet");
    qa_.live = load_net(prefix + "task_q1.rrlnet");
    qb_.live = load_net(prefix + "task_q2.rrlnet");
    qa_.target = load_net(prefix + "task_q1_target.rrlnet");
    qb_.target = load_net(prefix + "task_q2_target.rrlnet");
    actor_opt_.match(actor_);
    qa_opt_.match(qa_.live);
    qb_opt_.match(qb_.live);
    ga_.match(actor_);
    g1_.match(qa_.live);
    g2_.match(qb_.live);
  }

 private:
  SacConfig cfg_;
  Mlp actor_;
  TargetPair qa_, qb_;
  AdamState actor_opt_, qa_opt_, qb_opt_;
  MlpGrads ga_, g1_, g2_, scratch1_, scratch2_;
  MlpCache actor_eval_, actor_cache_, qe1_, qe2_, qc1_, qc2_;
  Matrix sa_, sn_, st_, anext_, zbuf_, zs_, act_, dact_, dy1_, dy2_, dxa_, dxb_, tbuf_, sgbuf_,
      dvda_;
  std::vector<double> vbuf_;
};

}  // namespace rrl
