#include <cstdio>

#include "rrl/env_config.hpp"
using namespace rrl;

int main(int argc, char** argv) {
  const double noise = argc > 1 ? std::atof(argv[1]) : 0.6;
  NavConfig cfg = resolve_env("nav1");
  for (uint64_t seed = 0; seed < 10; ++seed) {
    ConstrainedEnv env(cfg, seed);
    const Dataset d = collect_offline(env, 8000, noise);
    std::printf("seed %llu violations %zu\n", (unsigned long long)seed, d.violations);
  }
  return 0;
}
