#include <cmath>
#include <cstdio>
#include <random>

#include "fdilab/scenario/scenario.hpp"

namespace fdilab::scenario {

namespace {

using iec104::Cot;
using iec104::TypeId;

constexpr const char* kNames[] = {"paper-experiment", "benign-only", "benign-random", "stealth", "legit-replay", "strict-soak"};

NodeSpec node(const std::string& name, int host) {
  char mac[18];
  std::snprintf(mac, sizeof mac, "02:00:0a:00:68:%02x", host);
  return {name, mac, "10.0.104." + std::to_string(host), 0.05};
}

// Lab topology with the two-step operator schedule and no attacker.
Scenario base(const std::string& name, std::uint64_t seed) {
  Scenario s;
  s.name = name;
  s.seed = seed;
  s.mtu.node = node("MTU", 10);
  for (int i = 1; i <= 4; ++i) {
    RtuSpec r;
    r.node = node("RTU" + std::to_string(i), 10 + i);
    r.ca = static_cast<std::uint16_t>(i);
    s.rtus.push_back(r);
  }
  s.mtu.schedule = {
      {360.0, "RTU4", 1002, 0.30},
      {370.0, "RTU4", 1002, 0.50},
      {480.0, "RTU3", 1003, 0.21},
      {490.0, "RTU3", 1003, 0.42},
  };
  return s;
}

mitm::Action inject_setpoint(std::uint16_t ca, std::uint32_t ioa, float value) {
  mitm::Action a;
  a.kind = mitm::ActionKind::Inject;
  a.direction = mitm::Direction::ToRtu;
  a.forge = mitm::Forge{TypeId::C_SE_NC_1, Cot::Activation, ca, ioa, value};
  return a;
}

mitm::Action inject_measurement(std::uint16_t ca, std::uint32_t ioa, float value) {
  mitm::Action a;
  a.kind = mitm::ActionKind::Inject;
  a.direction = mitm::Direction::ToMtu;
  a.forge = mitm::Forge{TypeId::M_ME_NC_1, Cot::Spontaneous, ca, ioa, value};
  return a;
}

void add_attackers(Scenario& s, const mitm::ProxyOptions& proxy) {
  AgentSpec a1;
  a1.node = node("agent1", 16);
  a1.endpoint = "RTU3";
  a1.proxy = proxy;
  AgentSpec a2;
  a2.node = node("agent2", 17);
  a2.endpoint = "RTU4";
  a2.proxy = proxy;
  s.agents = {a1, a2};
  CoordinatorSpec c;
  c.node = node("coordinator", 19);
  s.coordinator = c;
}

Scenario paper_experiment(const std::string& name, std::uint64_t seed, const mitm::ProxyOptions& proxy) {
  Scenario s = base(name, seed);
  add_attackers(s, proxy);
  s.coordinator->plan = {
      {600.0, "agent2", inject_setpoint(4, 1002, 1.0F)},
      {750.0, "agent1", inject_setpoint(3, 1003, -0.4167F)},
  };
  return s;
}

Scenario benign_random(std::uint64_t seed) {
  Scenario s = base("benign-random", seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> load(5.0, 15.0);
  std::uniform_real_distribution<double> latency_us(20.0, 500.0);
  std::uniform_real_distribution<double> offset_ms(0.0, 999.0);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  std::uniform_real_distribution<double> jitter_us(0.0, 200.0);
  const double l1 = std::round(load(rng) * 100.0) / 100.0;
  const double l2 = std::round(load(rng) * 100.0) / 100.0;
  s.grid = grid::default_grid(l1, l2);
  s.link_jitter_ms = std::round(jitter_us(rng)) / 1000.0;
  s.mtu.node.link_latency_ms = std::round(latency_us(rng)) / 1000.0;
  for (auto& r : s.rtus) {
    r.node.link_latency_ms = std::round(latency_us(rng)) / 1000.0;
    r.measurement_offset = std::round(offset_ms(rng)) / 1000.0;
  }
  for (auto& c : s.mtu.schedule) c.t += std::round(shift(rng) * 10.0) / 10.0;
  return s;
}

}  // namespace

std::vector<std::string> builtin_names() { return {std::begin(kNames), std::end(kNames)}; }

bool is_builtin(const std::string& name) {
  for (const char* n : kNames) {
    if (name == n) return true;
  }
  return false;
}

Scenario builtin(const std::string& name, std::uint64_t seed) {
  Scenario s;
  if (name == "paper-experiment") {
    s = paper_experiment(name, seed, {});
  } else if (name == "benign-only") {
    s = base(name, seed);
  } else if (name == "benign-random") {
    s = benign_random(seed);
  } else if (name == "stealth") {
    s = paper_experiment(name, seed, {true, true, true});
  } else if (name == "legit-replay") {
    // The operator itself issues the two set-points the agents inject.
    s = base(name, seed);
    s.mtu.schedule.push_back({600.0, "RTU4", 1002, 1.0F});
    s.mtu.schedule.push_back({750.0, "RTU3", 1003, -0.4167F});
  } else if (name == "strict-soak") {
    s = base(name, seed);
    s.mtu.strict = true;
    add_attackers(s, {true, true, true});
    for (int i = 0; i < 10; ++i) {
      const float value = i % 2 == 0 ? -0.2F : 0.3F;
      s.coordinator->plan.push_back({600.0 + 20.0 * i, "agent1", inject_setpoint(3, 1003, value)});
    }
    s.coordinator->plan.push_back({805.0, "agent1", inject_measurement(3, 2003, 0.0F)});
    s.coordinator->plan.push_back({825.0, "agent1", inject_measurement(3, 3003, 400.0F)});
  } else {
    throw ValidationError("scenario", "unknown builtin " + name);
  }
  s.validate();
  return s;
}

}  // namespace fdilab::scenario
