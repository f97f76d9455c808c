#pragma once
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "rrl/adam.hpp"
#include "rrl/mlp.hpp"
#include "rrl/replay.hpp"
#include "rrl/serialize.hpp"
#include "rrl/target.hpp"

namespace rrl {

// Supplies actions for successor states when forming critic targets.
using SuccessorFn = std::function<void(const Matrix& next_states, Matrix& next_actions, Rng&)>;

// Per-sample scalar value of (s, a) plus its gradient wrt the action.
using ValueGradFn =
    std::function<void(const Matrix& states, const Matrix& actions, std::vector<double>& v,
                       Matrix& dv_da)>;

struct SafetyCriticConfig {
  int state_dim = 2;
  int action_dim = 2;
  std::vector<int> hidden = {32, 32};
  double gamma_risk = 0.8;
  double lr = 3e-4;
  double tau = 0.005;
  std::vector<double> state_shift, state_scale;  // empty = raw state inputs
};

// Input map for a net eating packed (state, action) rows: the state
// block gets the configured map, action dims pass through unchanged.
inline void apply_state_action_norm(Mlp& net, const std::vector<double>& state_shift,
                                    const std::vector<double>& state_scale) {
  if (state_scale.empty()) return;
  std::vector<double> shift(state_shift), scale(state_scale);
  shift.resize(net.in_dim(), 0.0);
  scale.resize(net.in_dim(), 1.0);
  net.set_input_norm(std::move(shift), std::move(scale));
}

// Twin sigmoid-head critics estimating the discounted probability of
// a future constraint violation. Reported values take the max of the
// twins (pessimism for costs); both twins regress to the same
// max-of-targets backup.
class SafetyCritic {
 public:
  SafetyCritic(SafetyCriticConfig cfg, Rng init_rng) : cfg_(std::move(cfg)) {
    if (cfg_.gamma_risk < 0.0 || cfg_.gamma_risk > 1.0)
      throw std::invalid_argument("safety critic: gamma_risk outside [0,1]");
    std::vector<int> dims{cfg_.state_dim + cfg_.action_dim};
    for (int h : cfg_.hidden) dims.push_back(h);
    dims.push_back(1);
    Mlp n1(dims, Act::Relu, Act::Sigmoid), n2(dims, Act::Relu, Act::Sigmoid);
    n1.init(init_rng);
    n2.init(init_rng);
    apply_state_action_norm(n1, cfg_.state_shift, cfg_.state_scale);
    apply_state_action_norm(n2, cfg_.state_shift, cfg_.state_scale);
    q1_ = TargetPair(std::move(n1), cfg_.tau);
    q2_ = TargetPair(std::move(n2), cfg_.tau);
    a1_ = AdamState(cfg_.lr);
    a2_ = AdamState(cfg_.lr);
    a1_.match(q1_.live);
    a2_.match(q2_.live);
    g1_.match(q1_.live);
    g2_.match(q2_.live);
  }

  double gamma_risk() const { return cfg_.gamma_risk; }
  const SafetyCriticConfig& config() const { return cfg_; }
  void sync_targets() {
    q1_.hard_sync();
    q2_.hard_sync();
  }
  Mlp& twin1() { return q1_.live; }
  Mlp& twin2() { return q2_.live; }
  const Mlp& twin1() const { return q1_.live; }
  const Mlp& twin2() const { return q2_.live; }

  // Pessimistic point estimate: max of the live twins.
  double qrisk(Vec2 s, Vec2 a) {
    Matrix sa(1, cfg_.state_dim + cfg_.action_dim);
    sa(0, 0) = s[0];
    sa(0, 1) = s[1];
    sa(0, cfg_.state_dim) = a[0];
    sa(0, cfg_.state_dim + 1) = a[1];
    std::vector<double> out;
    qrisk_batch(sa, out);
    return out[0];
  }

  void qrisk_batch(const Matrix& sa, std::vector<double>& out) {
    forward(q1_.live, sa, eval1_);
    forward(q2_.live, sa, eval2_);
    out.resize(sa.rows);
    for (int i = 0; i < sa.rows; ++i)
      out[i] = std::max(output_of(eval1_)(i, 0), output_of(eval2_)(i, 0));
  }

  // Value of each twin separately (testing and diagnostics).
  std::pair<double, double> twin_values(Vec2 s, Vec2 a) {
    Matrix sa(1, cfg_.state_dim + cfg_.action_dim);
    sa(0, 0) = s[0];
    sa(0, 1) = s[1];
    sa(0, cfg_.state_dim) = a[0];
    sa(0, cfg_.state_dim + 1) = a[1];
    forward(q1_.live, sa, eval1_);
    forward(q2_.live, sa, eval2_);
    return {output_of(eval1_)(0, 0), output_of(eval2_)(0, 0)};
  }

  // Bellman backup treated as a constant: c + (1-c) g max target.
  std::vector<double> bellman_targets(const std::vector<const Transition*>& batch,
                                      const Matrix& next_actions) {
    const int B = static_cast<int>(batch.size());
    sn_.reshape(B, cfg_.state_dim + cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      sn_(i, 0) = batch[i]->sn[0];
      sn_(i, 1) = batch[i]->sn[1];
      sn_(i, cfg_.state_dim) = next_actions(i, 0);
      sn_(i, cfg_.state_dim + 1) = next_actions(i, 1);
    }
    forward(q1_.target, sn_, eval1_);
    forward(q2_.target, sn_, eval2_);
    std::vector<double> y(B);
    for (int i = 0; i < B; ++i) {
      const double qbar = std::max(output_of(eval1_)(i, 0), output_of(eval2_)(i, 0));
      const double c = batch[i]->c;
      y[i] = c + (1.0 - c) * cfg_.gamma_risk * qbar;
    }
    return y;
  }

  // Mean over the batch of the average squared twin residual; fills
  // per-twin gradients. Pure in the live nets for a fixed target set.
  double loss_and_grads(const Matrix& sa, const std::vector<double>& y, MlpGrads& g1,
                        MlpGrads& g2) {
    const int B = sa.rows;
    forward(q1_.live, sa, c1_);
    forward(q2_.live, sa, c2_);
    dy1_.reshape(B, 1);
    dy2_.reshape(B, 1);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
      const double r1 = output_of(c1_)(i, 0) - y[i];
      const double r2 = output_of(c2_)(i, 0) - y[i];
      loss += 0.5 * (r1 * r1 + r2 * r2);
      dy1_(i, 0) = r1 / B;
      dy2_(i, 0) = r2 / B;
    }
    g1.zero();
    g2.zero();
    backward(q1_.live, c1_, dy1_, g1);
    backward(q2_.live, c2_, dy2_, g2);
    return loss / B;
  }

  // One gradient step on both twins toward the shared backup, then
  // Polyak on both targets. Returns the mean squared error.
  double update(const std::vector<const Transition*>& batch, const SuccessorFn& succ, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("safety critic update: empty batch");
    const int B = static_cast<int>(batch.size());
    next_s_.reshape(B, cfg_.state_dim);
    for (int i = 0; i < B; ++i) {
      next_s_(i, 0) = batch[i]->sn[0];
      next_s_(i, 1) = batch[i]->sn[1];
    }
    succ(next_s_, next_a_, rng);
    return step_with_next_actions(batch);
  }

  // Offline variant: successor actions come from the recorded rows, so
  // targets only ever query state-action pairs the dataset visited.
  // Querying a learned policy here instead lets the max-of-targets
  // backup inflate value estimates on actions the data never covers.
  double update_offline(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("safety critic update: empty batch");
    const int B = static_cast<int>(batch.size());
    next_a_.reshape(B, cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      next_a_(i, 0) = batch[i]->next_a[0];
      next_a_(i, 1) = batch[i]->next_a[1];
    }
    return step_with_next_actions(batch);
  }

  // Offline phase: `steps` updates on batches drawn from the dataset
  // buffer. Warns (but proceeds) when no violations are present,
  // since the critic then collapses toward zero.
  void pretrain(const ReplayBuffer& offline, int steps, int batch_size, Rng& rng) {
    if (offline.empty()) {
      std::fprintf(stderr, "warning: safety critic pretraining skipped, offline set empty\n");
      return;
    }
    bool any_violation = false;
    for (size_t i = 0; i < offline.size() && !any_violation; ++i)
      any_violation = offline.at(i).c > 0.5;
    if (!any_violation)
      std::fprintf(stderr,
                   "warning: offline set has no violations; safety critic will collapse to 0\n");
    for (int s = 0; s < steps; ++s) update_offline(offline.sample(batch_size, rng));
  }

  // Gradient of the pessimistic value wrt the action, flowing through
  // the per-sample active twin (ties resolve to the first twin).
  // Fills q with the max-twin values and dq_da with B x action_dim.
  void qrisk_action_grad(const Matrix& states, const Matrix& actions, std::vector<double>& q,
                         Matrix& dq_da) {
    const int B = states.rows;
    sa_.reshape(B, cfg_.state_dim + cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      sa_(i, 0) = states(i, 0);
      sa_(i, 1) = states(i, 1);
      sa_(i, cfg_.state_dim) = actions(i, 0);
      sa_(i, cfg_.state_dim + 1) = actions(i, 1);
    }
    forward(q1_.live, sa_, c1_);
    forward(q2_.live, sa_, c2_);
    q.resize(B);
    dy1_.reshape(B, 1);
    dy2_.reshape(B, 1);
    for (int i = 0; i < B; ++i) {
      const double v1 = output_of(c1_)(i, 0), v2 = output_of(c2_)(i, 0);
      const bool first = v1 >= v2;
      q[i] = first ? v1 : v2;
      dy1_(i, 0) = first ? 1.0 : 0.0;
      dy2_(i, 0) = first ? 0.0 : 1.0;
    }
    g1_.zero();
    g2_.zero();
    backward(q1_.live, c1_, dy1_, g1_, &dx1_);
    backward(q2_.live, c2_, dy2_, g2_, &dx2_);
    dq_da.reshape(B, cfg_.action_dim);
    for (int i = 0; i < B; ++i)
      for (int k = 0; k < cfg_.action_dim; ++k)
        dq_da(i, k) = dx1_(i, cfg_.state_dim + k) + dx2_(i, cfg_.state_dim + k);
  }

  void save(const std::string& dir_prefix) const {
    save_net(q1_.live, dir_prefix + "risk_q1.rrlnet");
    save_net(q2_.live, dir_prefix + "risk_q2.rrlnet");
    save_net(q1_.target, dir_prefix + "risk_q1_target.rrlnet");
    save_net(q2_.target, dir_prefix + "risk_q2_target.rrlnet");
  }
  void load(const std::string& dir_prefix) {
    q1_.live = load_net(dir_prefix + "risk_q1.rrlnet");
    q2_.live = load_net(dir_prefix + "risk_q2.rrlnet");
    q1_.target = load_net(dir_prefix + "risk_q1_target.rrlnet");
    q2_.target = load_net(dir_prefix + "risk_q2_target.rrlnet");
    a1_.match(q1_.live);
    a2_.match(q2_.live);
    g1_.match(q1_.live);
    g2_.match(q2_.live);
  }

 private:
  // Shared update tail once next_a_ holds the successor actions.
  double step_with_next_actions(const std::vector<const Transition*>& batch) {
    const int B = static_cast<int>(batch.size());
    const std::vector<double> y = bellman_targets(batch, next_a_);
    sa_.reshape(B, cfg_.state_dim + cfg_.action_dim);
    for (int i = 0; i < B; ++i) {
      sa_(i, 0) = batch[i]->s[0];
      sa_(i, 1) = batch[i]->s[1];
      sa_(i, cfg_.state_dim) = batch[i]->a[0];
      sa_(i, cfg_.state_dim + 1) = batch[i]->a[1];
    }
    const double loss = loss_and_grads(sa_, y, g1_, g2_);
    adam_step(q1_.live, g1_, a1_);
    adam_step(q2_.live, g2_, a2_);
    q1_.polyak();
    q2_.polyak();
    return loss;
  }

  SafetyCriticConfig cfg_;
  TargetPair q1_, q2_;
  AdamState a1_, a2_;
  MlpGrads g1_, g2_;
  MlpCache c1_, c2_, eval1_, eval2_;
  Matrix sa_, sn_, next_s_, next_a_, dy1_, dy2_, dx1_, dx2_;
};

}  // namespace rrl
