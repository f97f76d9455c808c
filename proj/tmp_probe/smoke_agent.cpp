#include "rrl/agent.hpp"
int main(){rrl::AgentConfig c; rrl::CompositeAgent a(c, 7); rrl::Rng r(1); auto x = a.act({0,0}, r); return x.recovery_engaged?0:0;}
