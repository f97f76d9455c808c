#include <chrono>
#include <cstdio>

#include "rrl/env.hpp"
#include "rrl/recovery.hpp"
#include "rrl/sac.hpp"
#include "rrl/safety_critic.hpp"

using namespace rrl;
using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main() {
  Rng rng(1);
  ReplayBuffer buf(100000);
  for (int i = 0; i < 20000; ++i) {
    Transition t;
    t.s = {rng.uniform(-60, 10), rng.uniform(-20, 20)};
    t.a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    t.a_task = t.a;
    t.sn = {t.s[0] + 0.8 * t.a[0], t.s[1] + 0.8 * t.a[1]};
    t.next_a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    t.r = -norm(t.sn);
    t.c = rng.uniform() < 0.05 ? 1.0 : 0.0;
    t.done = t.c > 0.5;
    buf.push(t);
  }

  SacConfig scfg;
  SacAgent sac(scfg, Rng(2));
  SafetyCriticConfig ccfg;
  SafetyCritic critic(ccfg, Rng(3));
  MfRecoveryConfig rcfg;
  ModelFreeRecovery rec(rcfg, Rng(4));

  const int N = 400;
  // SAC critic+actor at 256
  {
    auto t0 = Clock::now();
    for (int i = 0; i < N; ++i) {
      auto b = buf.sample(256, rng);
      sac.critic_update(b, rng);
      sac.actor_update(b, rng);
    }
    std::printf("sac(critic+actor)@256: %.3f ms/step\n", ms_since(t0) / N);
  }
  // safety critic with task-policy successors at 256 and 1000
  for (int B : {256, 1000}) {
    auto succ = sac.successor_sampler();
    auto t0 = Clock::now();
    for (int i = 0; i < N; ++i) critic.update(buf.sample(B, rng), succ, rng);
    std::printf("risk-critic@%d (task succ): %.3f ms/step\n", B, ms_since(t0) / N);
  }
  // composite successor: task sample + qrisk + rec replace
  {
    Matrix atask, q_dummy;
    std::vector<double> q;
    Matrix arec;
    auto succ = [&](const Matrix& sn, Matrix& an, Rng& r) {
      Matrix z(sn.rows, 2);
      for (auto& v : z.a) v = r.normal();
      std::vector<double> lp;
      sac.sample_actions_batch(sn, z, atask, lp);
      Matrix sa(sn.rows, 4);
      for (int i = 0; i < sn.rows; ++i) {
        sa(i, 0) = sn(i, 0);
        sa(i, 1) = sn(i, 1);
        sa(i, 2) = atask(i, 0);
        sa(i, 3) = atask(i, 1);
      }
      critic.qrisk_batch(sa, q);
      rec.actions_batch(sn, arec);
      an.reshape(sn.rows, 2);
      for (int i = 0; i < sn.rows; ++i) {
        const bool eng = q[i] > 0.3;
        an(i, 0) = eng ? arec(i, 0) : atask(i, 0);
        an(i, 1) = eng ? arec(i, 1) : atask(i, 1);
      }
    };
    for (int B : {256, 1000}) {
      auto t0 = Clock::now();
      for (int i = 0; i < N; ++i) critic.update(buf.sample(B, rng), succ, rng);
      std::printf("risk-critic@%d (composite succ): %.3f ms/step\n", B, ms_since(t0) / N);
    }
  }
  // MF recovery step
  for (int B : {256, 1000}) {
    auto t0 = Clock::now();
    for (int i = 0; i < N; ++i) rec.update(buf.sample(B, rng), critic);
    std::printf("rec@%d: %.3f ms/step\n", B, ms_since(t0) / N);
  }
  // offline pretrain step pair at 1000
  {
    auto t0 = Clock::now();
    for (int i = 0; i < N; ++i) {
      auto b = buf.sample(1000, rng);
      critic.update_offline(b);
      rec.update(b, critic);
    }
    std::printf("pretrain pair@1000: %.3f ms/step\n", ms_since(t0) / N);
  }
  return 0;
}
