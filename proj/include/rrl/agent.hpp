#pragma once
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrl/env.hpp"
#include "rrl/recovery.hpp"
#include "rrl/sac.hpp"
#include "rrl/safety_critic.hpp"

namespace rrl {

enum class RecoveryMode { ModelFree, ModelBased };

inline const char* to_string(RecoveryMode m) {
  return m == RecoveryMode::ModelFree ? "model-free" : "model-based";
}

struct AgentConfig {
  RecoveryMode mode = RecoveryMode::ModelFree;
  double eps_risk = 0.3;
  int task_batch = 256;
  // Online risk batch runs at 256 here; the full-scale recipe uses 1000
  // but pretraining keeps that size, so the offline phase is unchanged.
  int risk_batch = 256;
  int pretrain_steps = 10000;
  int pretrain_batch = 1000;
  int dyn_pretrain_epochs = 50;
  int dyn_online_epochs = 5;
  int dyn_batch = 256;
  size_t replay_capacity = 1000000;
  bool relabel = true;         // off: the task buffer stores executed actions
  bool online_updates = true;  // off: the risk critic and recovery stay frozen online
  SacConfig task;
  SafetyCriticConfig risk;
  MfRecoveryConfig rec;
  DynamicsConfig dyn;
  MpcConfig mpc;

  void validate() const {
    if (!(eps_risk >= 0.0 && eps_risk <= 1.0))
      throw std::invalid_argument("agent: eps_risk must lie in [0,1]");
    if (task_batch < 1 || risk_batch < 1 || pretrain_batch < 1 || dyn_batch < 1)
      throw std::invalid_argument("agent: batch sizes must be positive");
    if (pretrain_steps < 0 || dyn_pretrain_epochs < 0 || dyn_online_epochs < 0)
      throw std::invalid_argument("agent: training step counts must be nonnegative");
    mpc.validate();
  }
};

// Component configs wired to one environment: workspace normalization
// on every state input and the env's action box on every actor.
inline AgentConfig agent_config_for(const NavConfig& env, double gamma_risk, double eps_risk) {
  AgentConfig c;
  c.eps_risk = eps_risk;
  c.risk.gamma_risk = gamma_risk;
  const auto [shift, scale] = workspace_norm(env);
  c.task.state_shift = shift;
  c.task.state_scale = scale;
  c.risk.state_shift = shift;
  c.risk.state_scale = scale;
  c.rec.state_shift = shift;
  c.rec.state_scale = scale;
  c.dyn.state_shift = shift;
  c.dyn.state_scale = scale;
  c.task.action_scale = env.max_action;
  c.rec.action_scale = env.max_action;
  c.mpc.action_scale = env.max_action;
  return c;
}

struct ActResult {
  Vec2 a{0.0, 0.0};       // executed in the environment
  Vec2 a_task{0.0, 0.0};  // what the task policy proposed
  bool recovery_engaged = false;
};

struct EpisodeMetrics {
  bool success = false;
  bool violation = false;
  bool recovery_engaged_at_violation = false;
  double ret = 0.0;  // undiscounted sum of raw task rewards
  int steps = 0;
  int engaged_steps = 0;
};

// Interaction loop shared by every agent in this library: act, step,
// observe, one update round per timestep, per-episode hooks. Episodes
// end on violation, success, or the step cap (the env horizon unless a
// positive override is given).
template <class AgentT>
std::vector<EpisodeMetrics> train_loop(AgentT& agent, ConstrainedEnv& env, int episodes,
                                       int horizon = 0) {
  if (episodes < 0) throw std::invalid_argument("train: negative episode count");
  const int cap = horizon > 0 ? horizon : env.config().horizon;
  std::vector<EpisodeMetrics> out;
  out.reserve(static_cast<size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    agent.begin_episode(ep, episodes);
    Vec2 s = env.reset();
    EpisodeMetrics m;
    for (int t = 0;; ++t) {
      const ActResult ar = agent.act(s, agent.act_rng());
      const StepResult sr = env.step(ar.a);
      agent.observe(s, ar, sr);
      m.ret += sr.reward;
      ++m.steps;
      m.engaged_steps += ar.recovery_engaged ? 1 : 0;
      agent.update_step(agent.train_rng());
      if (sr.done || t + 1 >= cap) {
        m.violation = sr.c > 0.5;
        m.success = sr.success;
        m.recovery_engaged_at_violation = m.violation && ar.recovery_engaged;
        break;
      }
      s = sr.next;
    }
    agent.end_episode(agent.train_rng());
    out.push_back(m);
  }
  return out;
}

// Task policy guarded by the safety critic: when the risk of the
// proposed action exceeds eps_risk, the recovery policy acts instead.
// The task replay buffer still records the proposed action, so the
// task policy trains against the environment the gate induces.
class CompositeAgent {
 public:
  CompositeAgent(AgentConfig cfg, uint64_t seed)
      : cfg_(validated(std::move(cfg))),
        seed_(seed),
        root_(seed),
        task_(cfg_.task, root_.split("task-init")),
        critic_(cfg_.risk, root_.split("risk-init")),
        d_task_(cfg_.replay_capacity),
        d_rec_(cfg_.replay_capacity),
        act_rng_(root_.split("act")),
        train_rng_(root_.split("train")) {
    if (cfg_.mode == RecoveryMode::ModelFree)
      rec_.emplace(cfg_.rec, root_.split("rec-init"));
    else
      ens_.emplace(cfg_.dyn, root_.split("dyn-init"));
    succ_ = make_successor_fn();
  }

  CompositeAgent(const CompositeAgent&) = delete;
  CompositeAgent& operator=(const CompositeAgent&) = delete;

  const AgentConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }
  double eps_risk() const { return cfg_.eps_risk; }
  bool pretrained() const { return pretrained_; }
  bool gate_enabled() const { return gate_enabled_; }
  int episodes_done() const { return episodes_done_; }
  SacAgent& task() { return task_; }
  SafetyCritic& critic() { return critic_; }
  ModelFreeRecovery& mf() {
    if (!rec_) throw std::logic_error("agent has no model-free recovery policy");
    return *rec_;
  }
  DynamicsEnsemble& ensemble() {
    if (!ens_) throw std::logic_error("agent has no dynamics ensemble");
    return *ens_;
  }
  const ReplayBuffer& d_task() const { return d_task_; }
  const ReplayBuffer& d_rec() const { return d_rec_; }
  Rng& act_rng() { return act_rng_; }
  Rng& train_rng() { return train_rng_; }

  // Proposes a task action and routes it through the gate.
  ActResult act(Vec2 s, Rng& rng) { return act_given(s, task_.sample_action(s, rng), rng); }

  // Gate decision for a caller-supplied proposal; act() runs through
  // here, so tests can probe the gate with planted actions.
  ActResult act_given(Vec2 s, Vec2 a_task, Rng& rng) {
    ActResult r;
    r.a_task = a_task;
    r.recovery_engaged = gate_enabled_ && critic_.qrisk(s, a_task) > cfg_.eps_risk;
    r.a = r.recovery_engaged ? recovery_action(s, rng) : a_task;
    return r;
  }

  Vec2 recovery_action(Vec2 s, Rng& rng) {
    if (rec_) return rec_->action(s);
    return mpc_recovery_action(*ens_, critic_, s, cfg_.mpc, rng);
  }

  // The task buffer's action is the proposed one; the recovery buffer
  // keeps what actually ran, labeled with the constraint cost.
  void observe(Vec2 s, const ActResult& act, const StepResult& step) {
    Transition t;
    t.s = s;
    t.sn = step.next;
    t.r = step.reward;
    t.c = step.c;
    t.done = step.done;
    t.a = cfg_.relabel ? act.a_task : act.a;
    t.a_task = t.a;
    d_task_.push(t);
    t.a = act.a;
    t.a_task = act.a_task;
    d_rec_.push(t);
  }

  // Offline phase: the recovery buffer starts as a copy of the offline
  // set, and the risk critic plus recovery policy train on it. The
  // task policy is untouched here.
  void pretrain(const std::vector<Transition>& offline) {
    d_rec_.assign(offline);
    if (offline.empty()) {
      std::fprintf(stderr, "warning: empty offline set; components left untrained\n");
      return;
    }
    Rng rng = root_.split("pretrain");
    if (rec_)
      pretrain_mf_recovery(critic_, *rec_, d_rec_, cfg_.pretrain_steps, cfg_.pretrain_batch, rng);
    else
      pretrain_mb_recovery(critic_, *ens_, d_rec_, cfg_.pretrain_steps, cfg_.pretrain_batch,
                           cfg_.dyn_pretrain_epochs, cfg_.dyn_batch, rng);
    pretrained_ = true;
  }

  // Restores a cached pretraining result; buffer seeding matches
  // pretrain() on the same offline rows.
  void adopt_pretrained(const std::string& prefix, const std::vector<Transition>& offline) {
    critic_.load(prefix);
    if (rec_)
      rec_->load(prefix);
    else
      ens_->load(prefix);
    d_rec_.assign(offline);
    pretrained_ = true;
  }

  void mark_pretrained() { pretrained_ = true; }

  // Successor actions for the online risk backup, drawn from what the
  // agent would do next: the gated composite policy when a recovery
  // actor exists; the task policy in planner mode, where solving a
  // planning problem per batch row would dwarf the update itself.
  SuccessorFn successor_fn() const { return succ_; }

  // One gradient step per component per environment step: task critic
  // and actor on the task buffer, risk critic and recovery policy on
  // the recovery buffer.
  void update_step(Rng& rng) {
    if (d_task_.empty() || d_rec_.empty()) return;
    const auto tb = d_task_.sample(static_cast<size_t>(cfg_.task_batch), rng);
    check_finite(task_.critic_update(tb, rng), "task critic");
    check_finite(task_.actor_update(tb, rng), "task actor");
    if (!cfg_.online_updates) return;
    const auto rb = d_rec_.sample(static_cast<size_t>(cfg_.risk_batch), rng);
    check_finite(critic_.update(rb, succ_, rng), "risk critic");
    if (rec_) check_finite(rec_->update(rb, critic_), "recovery actor");
  }

  // From-scratch runs hold the gate open for one calibration episode:
  // an untrained sigmoid critic reads 0.5 everywhere, which would
  // otherwise hand every step to the untrained recovery policy.
  void begin_episode(int, int) { gate_enabled_ = pretrained_ || episodes_done_ > 0; }

  void end_episode(Rng& rng) {
    if (ens_ && cfg_.online_updates && !d_rec_.empty())
      check_finite(ens_->train_epochs(d_rec_, cfg_.dyn_online_epochs, cfg_.dyn_batch, rng),
                   "dynamics");
    ++episodes_done_;
  }

  std::vector<EpisodeMetrics> train_online(ConstrainedEnv& env, int episodes, int horizon = 0) {
    return train_loop(*this, env, episodes, horizon);
  }

  // Checkpoint bundle: one directory holding every component's
  // parameter files plus a manifest describing the run.
  void save_checkpoint(const std::string& dir, const std::string& env_name) const {
    std::filesystem::create_directories(dir);
    const std::string prefix = dir + "/";
    task_.save(prefix);
    critic_.save(prefix);
    if (rec_)
      rec_->save(prefix);
    else
      ens_->save(prefix);
    nlohmann::json j;
    j["env"] = env_name;
    j["seed"] = seed_;
    j["episodes"] = episodes_done_;
    j["pretrained"] = pretrained_;
    j["mode"] = to_string(cfg_.mode);
    j["eps_risk"] = cfg_.eps_risk;
    j["gamma_risk"] = cfg_.risk.gamma_risk;
    j["gamma"] = cfg_.task.gamma;
    j["alpha"] = cfg_.task.alpha;
    j["lr"] = cfg_.task.lr;
    j["tau"] = cfg_.task.tau;
    j["task_batch"] = cfg_.task_batch;
    j["risk_batch"] = cfg_.risk_batch;
    j["mpc_horizon"] = cfg_.mpc.horizon;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw std::runtime_error("cannot write checkpoint manifest in " + dir);
    out << j.dump(2) << "\n";
  }

  void load_checkpoint(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw std::runtime_error("checkpoint manifest missing in " + dir);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("malformed checkpoint manifest in " + dir + ": " + e.what());
    }
    if (j.value("mode", "") != to_string(cfg_.mode))
      throw std::runtime_error("checkpoint recovery mode mismatch in " + dir);
    const std::string prefix = dir + "/";
    task_.load(prefix);
    critic_.load(prefix);
    if (rec_)
      rec_->load(prefix);
    else
      ens_->load(prefix);
    episodes_done_ = j.value("episodes", 0);
    pretrained_ = j.value("pretrained", false);
  }

 private:
  static AgentConfig validated(AgentConfig c) {
    c.validate();
    return c;
  }

  void check_finite(double loss, const char* which) const {
    if (!std::isfinite(loss))
      throw std::runtime_error("non-finite " + std::string(which) + " loss (" +
                               std::to_string(loss) + ") at episode " +
                               std::to_string(episodes_done_) + "; aborting run");
  }

  SuccessorFn make_successor_fn() {
    if (!rec_) return task_.successor_sampler();
    return [this](const Matrix& sn, Matrix& an, Rng& rng) {
      const int B = sn.rows, ad = cfg_.task.action_dim, sd = cfg_.task.state_dim;
      zs_.reshape(B, ad);
      for (auto& v : zs_.a) v = rng.normal();
      std::vector<double> lp;
      task_.sample_actions_batch(sn, zs_, an, lp);
      sa_.reshape(B, sd + ad);
      for (int i = 0; i < B; ++i) {
        for (int d = 0; d < sd; ++d) sa_(i, d) = sn(i, d);
        for (int d = 0; d < ad; ++d) sa_(i, sd + d) = an(i, d);
      }
      critic_.qrisk_batch(sa_, q_);
      rec_->actions_batch(sn, arec_);
      for (int i = 0; i < B; ++i) {
        if (q_[i] <= cfg_.eps_risk) continue;
        for (int d = 0; d < ad; ++d) an(i, d) = arec_(i, d);
      }
    };
  }

  AgentConfig cfg_;
  uint64_t seed_;
  Rng root_;
  SacAgent task_;
  SafetyCritic critic_;
  std::optional<ModelFreeRecovery> rec_;
  std::optional<DynamicsEnsemble> ens_;
  ReplayBuffer d_task_, d_rec_;
  Rng act_rng_, train_rng_;
  SuccessorFn succ_;
  bool pretrained_ = false;
  bool gate_enabled_ = true;
  int episodes_done_ = 0;
  Matrix zs_, sa_, arec_;
  std::vector<double> q_;
};

}  // namespace rrl
