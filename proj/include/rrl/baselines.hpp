#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrl/agent.hpp"
#include "rrl/sac.hpp"
#include "rrl/safety_critic.hpp"

namespace rrl {

// Comparison learners sharing the SAC backbone. Four of them consult a
// safety critic; none of them has a recovery policy, so the executed
// action is always the policy's own.
enum class Baseline { Unconstrained, Lagrangian, Sqrl, Rspo, RewardPenalty, Rcpo };

inline const char* to_string(Baseline b) {
  switch (b) {
    case Baseline::Unconstrained: return "unconstrained";
    case Baseline::Lagrangian: return "lr";
    case Baseline::Sqrl: return "sqrl";
    case Baseline::Rspo: return "rspo";
    case Baseline::RewardPenalty: return "rp";
    case Baseline::Rcpo: return "rcpo";
  }
  return "unconstrained";
}

inline Baseline baseline_from_string(const std::string& s) {
  if (s == "unconstrained") return Baseline::Unconstrained;
  if (s == "lr") return Baseline::Lagrangian;
  if (s == "sqrl") return Baseline::Sqrl;
  if (s == "rspo") return Baseline::Rspo;
  if (s == "rp") return Baseline::RewardPenalty;
  if (s == "rcpo") return Baseline::Rcpo;
  throw std::invalid_argument("unknown baseline '" + s + "'");
}

// Penalty weight with its ascent rate; the projection keeps it
// non-negative after every update.
struct Multiplier {
  double lambda = 0.0;
  double eta = 1e-3;
  enum class Schedule { Fixed, LinearDecay };
  Schedule schedule = Schedule::Fixed;
};

// One ascent step on the constraint gap, projected at zero.
inline double dual_update(Multiplier& m, double mean_qrisk, double eps_risk) {
  m.lambda = std::max(0.0, m.lambda + m.eta * (mean_qrisk - eps_risk));
  return m.lambda;
}

// Linear decay from twice the base weight at episode 0 down to zero.
inline double rspo_schedule(int episode, int total, double lambda_base) {
  if (total < 1) throw std::invalid_argument("schedule: total episode count must be positive");
  if (episode < 0 || episode > total)
    throw std::invalid_argument("schedule: episode index out of range");
  return 2.0 * lambda_base * (1.0 - static_cast<double>(episode) / total);
}

// Constraint cost folded into the reward before storage.
inline double rp_reward(double r, double c, double lambda) { return r - lambda * c; }

// Actor objective term v = -min task Q + lambda (qrisk - eps_risk).
// At lambda 0 this reduces to the plain pessimistic value. qrisk_sum,
// when given, accumulates the batch's total risk for the dual step.
inline ValueGradFn penalized_value_fn(SacAgent& task, SafetyCritic& critic, double lambda,
                                      double eps_risk, double* qrisk_sum = nullptr) {
  return [&task, &critic, lambda, eps_risk, qrisk_sum, q = std::vector<double>{},
          dq = Matrix{}](const Matrix& st, const Matrix& at, std::vector<double>& v,
                         Matrix& dv) mutable {
    task.qmin_action_grad(st, at, v, dv);
    critic.qrisk_action_grad(st, at, q, dq);
    double sum = 0.0;
    for (int i = 0; i < st.rows; ++i) {
      sum += q[i];
      v[static_cast<size_t>(i)] = -v[static_cast<size_t>(i)] + lambda * (q[static_cast<size_t>(i)] - eps_risk);
    }
    for (size_t k = 0; k < dv.a.size(); ++k) dv.a[k] = -dv.a[k] + lambda * dq.a[k];
    if (qrisk_sum) *qrisk_sum += sum;
  };
}

// Same penalty without the constant threshold shift:
// v = -min task Q + lambda qrisk.
inline ValueGradFn critic_penalty_value_fn(SacAgent& task, SafetyCritic& critic, double lambda,
                                           double* qrisk_sum = nullptr) {
  return penalized_value_fn(task, critic, lambda, 0.0, qrisk_sum);
}

// Rejection-filtered sampling: draw up to max_tries actions from the
// policy, return the first whose risk clears the threshold, else the
// lowest-risk draw seen.
inline Vec2 sqrl_act(SacAgent& task, SafetyCritic& critic, Vec2 s, double eps_risk, int max_tries,
                     Rng& rng) {
  if (max_tries < 1) throw std::invalid_argument("filtered sampling: max_tries must be positive");
  Vec2 best{0.0, 0.0};
  double best_q = std::numeric_limits<double>::infinity();
  for (int t = 0; t < max_tries; ++t) {
    const Vec2 a = task.sample_action(s, rng);
    const double q = critic.qrisk(s, a);
    if (q <= eps_risk) return a;
    if (q < best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

inline bool uses_risk_critic(Baseline b) {
  return b == Baseline::Lagrangian || b == Baseline::Sqrl || b == Baseline::Rspo ||
         b == Baseline::Rcpo;
}

inline bool uses_dual_ascent(Baseline b) {
  return b == Baseline::Lagrangian || b == Baseline::Sqrl || b == Baseline::Rcpo;
}

struct BaselineConfig {
  Baseline kind = Baseline::Unconstrained;
  double lambda = 0.0;  // initial penalty weight; the decay schedule's base value
  double eps_risk = 0.3;
  double dual_eta = 1e-3;
  int sqrl_tries = 100;
  int task_batch = 256;
  int risk_batch = 256;
  int pretrain_steps = 10000;
  int pretrain_batch = 1000;
  size_t replay_capacity = 1000000;
  SacConfig task;
  SafetyCriticConfig risk;

  void validate() const {
    if (!(eps_risk >= 0.0 && eps_risk <= 1.0))
      throw std::invalid_argument("baseline: eps_risk must lie in [0,1]");
    if (lambda < 0.0) throw std::invalid_argument("baseline: lambda must be nonnegative");
    if (dual_eta <= 0.0) throw std::invalid_argument("baseline: dual rate must be positive");
    if (sqrl_tries < 1) throw std::invalid_argument("baseline: sqrl_tries must be positive");
    if (task_batch < 1 || risk_batch < 1 || pretrain_batch < 1)
      throw std::invalid_argument("baseline: batch sizes must be positive");
    if (pretrain_steps < 0)
      throw std::invalid_argument("baseline: pretrain step count must be nonnegative");
  }
};

inline BaselineConfig baseline_config_for(Baseline kind, const NavConfig& env, double gamma_risk,
                                          double eps_risk, double lambda) {
  BaselineConfig c;
  c.kind = kind;
  c.lambda = lambda;
  c.eps_risk = eps_risk;
  c.risk.gamma_risk = gamma_risk;
  const auto [shift, scale] = workspace_norm(env);
  c.task.state_shift = shift;
  c.task.state_scale = scale;
  c.risk.state_shift = shift;
  c.risk.state_scale = scale;
  c.task.action_scale = env.max_action;
  return c;
}

// SAC learner optionally penalized by a safety critic. Exposes the
// same interaction surface as the composite agent so one training loop
// drives both.
class BaselineAgent {
 public:
  BaselineAgent(BaselineConfig cfg, uint64_t seed)
      : cfg_(validated(std::move(cfg))),
        seed_(seed),
        root_(seed),
        task_(cfg_.task, root_.split("task-init")),
        d_task_(cfg_.replay_capacity),
        d_risk_(cfg_.replay_capacity),
        act_rng_(root_.split("act")),
        train_rng_(root_.split("train")) {
    if (uses_risk_critic(cfg_.kind)) {
      critic_.emplace(cfg_.risk, root_.split("risk-init"));
      succ_ = task_.successor_sampler();
    }
    mult_.lambda = cfg_.lambda;
    mult_.eta = cfg_.dual_eta;
    mult_.schedule =
        cfg_.kind == Baseline::Rspo ? Multiplier::Schedule::LinearDecay : Multiplier::Schedule::Fixed;
  }

  BaselineAgent(const BaselineAgent&) = delete;
  BaselineAgent& operator=(const BaselineAgent&) = delete;

  const BaselineConfig& config() const { return cfg_; }
  Baseline kind() const { return cfg_.kind; }
  uint64_t seed() const { return seed_; }
  double lambda() const { return mult_.lambda; }
  const Multiplier& multiplier() const { return mult_; }
  bool pretrained() const { return pretrained_; }
  int episodes_done() const { return episodes_done_; }
  SacAgent& task() { return task_; }
  SafetyCritic& critic() {
    if (!critic_) throw std::logic_error("baseline has no safety critic");
    return *critic_;
  }
  bool has_critic() const { return critic_.has_value(); }
  const ReplayBuffer& d_task() const { return d_task_; }
  const ReplayBuffer& d_risk() const { return d_risk_; }
  Rng& act_rng() { return act_rng_; }
  Rng& train_rng() { return train_rng_; }

  ActResult act(Vec2 s, Rng& rng) {
    ActResult r;
    r.a = cfg_.kind == Baseline::Sqrl
              ? sqrl_act(task_, *critic_, s, cfg_.eps_risk, cfg_.sqrl_tries, rng)
              : task_.sample_action(s, rng);
    r.a_task = r.a;
    return r;
  }

  // The constraint signal is stored with every row; learners that do
  // not consult it simply never read the field back.
  void observe(Vec2 s, const ActResult& act, const StepResult& step) {
    Transition t;
    t.s = s;
    t.sn = step.next;
    t.a = t.a_task = act.a;
    t.r = cfg_.kind == Baseline::RewardPenalty ? rp_reward(step.reward, step.c, mult_.lambda)
                                               : step.reward;
    t.c = step.c;
    t.done = step.done;
    d_task_.push(t);
    if (critic_) d_risk_.push(t);
  }

  // One gradient step per component per environment step, then one
  // dual ascent step on the actor batch's mean risk.
  void update_step(Rng& rng) {
    if (d_task_.empty()) return;
    const auto tb = d_task_.sample(static_cast<size_t>(cfg_.task_batch), rng);
    check_finite(task_.critic_update(tb, rng), "task critic");
    qrisk_sum_ = 0.0;
    check_finite(task_.actor_update_with(tb, rng, value_fn()), "task actor");
    if (!critic_) return;
    const auto rb = d_risk_.sample(static_cast<size_t>(cfg_.risk_batch), rng);
    check_finite(critic_->update(rb, succ_, rng), "risk critic");
    if (uses_dual_ascent(cfg_.kind))
      dual_update(mult_, qrisk_sum_ / static_cast<double>(tb.size()), cfg_.eps_risk);
  }

  void begin_episode(int episode, int total) {
    if (cfg_.kind == Baseline::Rspo) mult_.lambda = rspo_schedule(episode, total, cfg_.lambda);
  }

  void end_episode(Rng&) { ++episodes_done_; }

  std::vector<EpisodeMetrics> train_online(ConstrainedEnv& env, int episodes, int horizon = 0) {
    return train_loop(*this, env, episodes, horizon);
  }

  // Fits the safety critic to the offline set; learners without a
  // critic have nothing to fit.
  void pretrain(const std::vector<Transition>& offline) {
    if (!critic_) return;
    d_risk_.assign(offline);
    if (offline.empty()) {
      std::fprintf(stderr, "warning: empty offline set; safety critic left untrained\n");
      return;
    }
    Rng rng = root_.split("pretrain");
    critic_->pretrain(d_risk_, cfg_.pretrain_steps, cfg_.pretrain_batch, rng);
    pretrained_ = true;
  }

  // Loads cached critic parameters so every penalized learner starts
  // from the identical pretraining result.
  void adopt_pretrained(const std::string& prefix, const std::vector<Transition>& offline) {
    if (!critic_) return;
    critic_->load(prefix);
    d_risk_.assign(offline);
    pretrained_ = true;
  }

 private:
  static BaselineConfig validated(BaselineConfig cfg) {
    cfg.validate();
    return cfg;
  }

  ValueGradFn value_fn() {
    switch (cfg_.kind) {
      case Baseline::Lagrangian:
      case Baseline::Sqrl:
      case Baseline::Rspo:
        return penalized_value_fn(task_, *critic_, mult_.lambda, cfg_.eps_risk, &qrisk_sum_);
      case Baseline::Rcpo:
        return critic_penalty_value_fn(task_, *critic_, mult_.lambda, &qrisk_sum_);
      case Baseline::Unconstrained:
      case Baseline::RewardPenalty:
        break;
    }
    return task_.default_value_fn();
  }

  void check_finite(double loss, const char* which) const {
    if (!std::isfinite(loss))
      throw std::runtime_error(std::string("non-finite ") + which + " loss (" +
                               std::to_string(loss) + ") at episode " +
                               std::to_string(episodes_done_) + "; aborting run");
  }

  BaselineConfig cfg_;
  uint64_t seed_;
  Rng root_;
  SacAgent task_;
  std::optional<SafetyCritic> critic_;
  ReplayBuffer d_task_, d_risk_;
  Rng act_rng_, train_rng_;
  SuccessorFn succ_;
  Multiplier mult_;
  double qrisk_sum_ = 0.0;
  bool pretrained_ = false;
  int episodes_done_ = 0;
};

}  // namespace rrl
