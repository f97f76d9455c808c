#pragma once
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrl/geometry.hpp"
#include "rrl/replay.hpp"
#include "rrl/rng.hpp"

namespace rrl {

struct NavConfig {
  std::string name;
  Rect workspace;
  std::vector<Rect> obstacles;
  Vec2 start_mean{0.0, 0.0};
  double start_cov[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  Vec2 goal{0.0, 0.0};
  double goal_radius = 1.0;
  double sigma = 0.05;   // dynamics noise scale
  double drag = 0.2;     // action attenuation in [0,1)
  double max_action = 1.0;
  int horizon = 100;
  // data-collection knobs carried with the env description
  double collect_noise = 0.5;
  int offline_transitions = 8000;
};

// Affine map sending workspace coordinates onto [-1, 1] per axis, for
// conditioning network inputs. First element shifts, second scales.
inline std::pair<std::vector<double>, std::vector<double>> workspace_norm(const NavConfig& c) {
  std::vector<double> shift(2), scale(2);
  for (int d = 0; d < 2; ++d) {
    shift[d] = -0.5 * (c.workspace.lo[d] + c.workspace.hi[d]);
    scale[d] = 2.0 / (c.workspace.hi[d] - c.workspace.lo[d]);
  }
  return {shift, scale};
}

// Full validation used by config loading; construction of raw structs
// in tests may bypass this deliberately.
inline void validate_config(const NavConfig& c) {
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("invalid env config '" + c.name + "': " + why);
  };
  if (!c.workspace.valid() || c.workspace.lo[0] >= c.workspace.hi[0] ||
      c.workspace.lo[1] >= c.workspace.hi[1])
    fail("workspace is degenerate");
  if (c.goal_radius <= 0.0) fail("goal radius must be positive");
  if (c.sigma < 0.0) fail("noise scale must be nonnegative");
  if (c.drag < 0.0 || c.drag >= 1.0) fail("drag must lie in [0,1)");
  if (c.max_action <= 0.0) fail("max action magnitude must be positive");
  if (c.horizon < 1) fail("horizon must be at least 1");
  for (size_t i = 0; i < c.obstacles.size(); ++i) {
    const Rect& r = c.obstacles[i];
    if (!r.valid()) fail("obstacle " + std::to_string(i) + " has inverted corners");
    if (!c.workspace.contains(r.lo) || !c.workspace.contains(r.hi))
      fail("obstacle " + std::to_string(i) + " leaves the workspace");
    if (r.contains(c.start_mean)) fail("start mean lies inside obstacle " + std::to_string(i));
  }
  if (!c.workspace.contains(c.start_mean)) fail("start mean outside workspace");
  if (c.start_cov[0][1] != c.start_cov[1][0]) fail("start covariance not symmetric");
  if (c.start_cov[0][0] < 0.0 || c.start_cov[1][1] < 0.0 ||
      c.start_cov[0][0] * c.start_cov[1][1] - c.start_cov[0][1] * c.start_cov[1][0] < -1e-12)
    fail("start covariance not positive semidefinite");
}

struct StepResult {
  Vec2 next{0.0, 0.0};
  double reward = 0.0;
  double c = 0.0;
  bool done = false;
  bool success = false;
};

// 2D single integrator with additive Gaussian noise, termination on
// constraint violation, success inside the goal ball, or horizon.
class ConstrainedEnv {
 public:
  ConstrainedEnv(NavConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {}

  const NavConfig& config() const { return cfg_; }
  Vec2 state() const { return state_; }
  int steps_taken() const { return t_; }
  bool done() const { return done_; }
  Rng& rng() { return rng_; }

  Vec2 reset() {
    return reset_from([&](Rng& r) {
      // Cholesky factor of the 2x2 start covariance
      const double c00 = cfg_.start_cov[0][0], c01 = cfg_.start_cov[0][1],
                   c11 = cfg_.start_cov[1][1];
      const double l00 = std::sqrt(std::max(0.0, c00));
      const double l10 = l00 > 0.0 ? c01 / l00 : 0.0;
      const double l11 = std::sqrt(std::max(0.0, c11 - l10 * l10));
      const double z0 = r.normal(), z1 = r.normal();
      return Vec2{cfg_.start_mean[0] + l00 * z0, cfg_.start_mean[1] + l10 * z0 + l11 * z1};
    });
  }

  // Uniform-over-workspace reset used for offline data collection, so
  // the dataset covers regions the start distribution never visits.
  Vec2 reset_uniform() {
    return reset_from([&](Rng& r) {
      return Vec2{r.uniform(cfg_.workspace.lo[0], cfg_.workspace.hi[0]),
                  r.uniform(cfg_.workspace.lo[1], cfg_.workspace.hi[1])};
    });
  }

  // Start an episode from a caller-chosen valid state.
  Vec2 reset_to(Vec2 s) {
    return reset_from([&](Rng&) { return s; });
  }

  StepResult step(Vec2 action) {
    if (done_) throw std::runtime_error("step called on finished episode");
    const double m = cfg_.max_action;
    const Vec2 a{std::clamp(action[0], -m, m), std::clamp(action[1], -m, m)};
    const double w0 = cfg_.sigma * rng_.normal();
    const double w1 = cfg_.sigma * rng_.normal();
    const Vec2 next{state_[0] + (1.0 - cfg_.drag) * a[0] + w0,
                    state_[1] + (1.0 - cfg_.drag) * a[1] + w1};

    bool hit = !cfg_.workspace.contains(next);
    for (const Rect& obst : cfg_.obstacles) {
      if (hit) break;
      hit = segment_intersects_rect(state_, next, obst);
    }

    StepResult out;
    out.next = next;
    out.reward = -norm(next - cfg_.goal);
    out.c = hit ? 1.0 : 0.0;
    out.success = !hit && norm(next - cfg_.goal) <= cfg_.goal_radius;
    ++t_;
    out.done = hit || out.success || t_ >= cfg_.horizon;
    state_ = next;
    done_ = out.done;
    return out;
  }

 private:
  template <class Draw>
  Vec2 reset_from(Draw&& draw) {
    for (int tries = 0; tries < 1000; ++tries) {
      const Vec2 s = draw(rng_);
      if (!cfg_.workspace.contains(s)) continue;
      bool inside = false;
      for (const Rect& r : cfg_.obstacles) inside = inside || r.contains(s);
      if (inside) continue;
      state_ = s;
      t_ = 0;
      done_ = false;
      return s;
    }
    throw std::runtime_error("env '" + cfg_.name +
                             "': 1000 rejected start samples; start distribution overlaps "
                             "obstacles or leaves the workspace");
  }

  NavConfig cfg_;
  Rng rng_;
  Vec2 state_{0.0, 0.0};
  int t_ = 0;
  bool done_ = true;  // reset() must run before step()
};

// Scripted behavior policy: head for the closest point on the nearest
// obstacle at full speed, with exploration noise. Ties break toward
// the lowest obstacle index.
inline Vec2 nearest_obstacle_policy(Vec2 s, const NavConfig& cfg, double noise_scale, Rng& rng) {
  if (cfg.obstacles.empty())
    throw std::runtime_error("nearest_obstacle_policy: no obstacles configured");
  size_t best = 0;
  double best_d = 0.0;
  for (size_t i = 0; i < cfg.obstacles.size(); ++i) {
    const double d = norm(cfg.obstacles[i].closest_point(s) - s);
    if (i == 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  Vec2 dir = cfg.obstacles[best].closest_point(s) - s;
  const double n = norm(dir);
  dir = n > 1e-12 ? (1.0 / n) * dir : Vec2{1.0, 0.0};
  const double m = cfg.max_action;
  const Vec2 raw{m * dir[0] + noise_scale * rng.normal(), m * dir[1] + noise_scale * rng.normal()};
  return {std::clamp(raw[0], -m, m), std::clamp(raw[1], -m, m)};
}

// Roll the behavior policy with uniform resets until n transitions are
// recorded. All randomness flows through the env's stream.
// Data-generating controller for offline collection.
using BehaviorPolicy = std::function<Vec2(Vec2, Rng&)>;

// Aims at the closest obstacle point with additive exploration noise.
inline BehaviorPolicy obstacle_seeking_policy(NavConfig cfg, double noise_scale) {
  return [cfg = std::move(cfg), noise_scale](Vec2 s, Rng& rng) {
    return nearest_obstacle_policy(s, cfg, noise_scale, rng);
  };
}

inline Dataset collect_offline(ConstrainedEnv& env, const BehaviorPolicy& policy, int n) {
  if (n <= 0) throw std::invalid_argument("collect_offline: n must be positive");
  Dataset d;
  d.env_name = env.config().name;
  d.seed = env.rng().seed();
  Vec2 s = env.reset_uniform();
  while (static_cast<int>(d.rows.size()) < n) {
    const Vec2 a = policy(s, env.rng());
    const StepResult r = env.step(a);
    Transition t;
    t.s = s;
    t.a = a;
    t.a_task = a;
    t.sn = r.next;
    t.r = r.reward;
    t.c = r.c;
    t.done = r.done;
    d.rows.push_back(t);
    s = r.done ? env.reset_uniform() : r.next;
  }
  link_successor_actions(d.rows);
  d.violations = d.count_violations();
  return d;
}

// Default binding: obstacle-seeking behavior at the given noise scale.
inline Dataset collect_offline(ConstrainedEnv& env, int n, double noise_scale) {
  return collect_offline(env, obstacle_seeking_policy(env.config(), noise_scale), n);
}

}  // namespace rrl
