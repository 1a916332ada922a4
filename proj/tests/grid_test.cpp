#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fdilab/grid/grid_model.hpp"

namespace {

using namespace fdilab::grid;

// One 500 m string with a 36 kVA inverter and a measuring point behind it.
GridSpec single_string() {
  GridSpec g;
  g.assets = {{"PV", AssetKind::Pv, 36.0, true, "RTU1", 1, 2, 0.0, 0.0}};
  g.segments = {{"S", 500.0, 0.208, 0.08, {"PV"}}};
  g.measuring_points = {{"MP", {"S"}, {"RTU1"}, 3}};
  return g;
}

ProcessState with_power(const GridSpec& g, double kw) {
  ProcessState s = initial_state(g);
  s.active_power["PV"] = kw;
  return s;
}

ProcessState settle(const GridSpec& g, ProcessState s, double seconds) {
  for (int i = 0; i < static_cast<int>(seconds * 10.0 + 0.5); ++i) s = step(g, std::move(s), 0.1);
  return s;
}

TEST(Grid, FeedInVoltageRiseMatchesHandCalculation) {
  const GridSpec g = single_string();
  const double r_ohm = 0.208 * 0.5;
  const double expected = r_ohm * 18000.0 / 400.0;
  EXPECT_NEAR(expected, 4.68, 1e-12);
  EXPECT_NEAR(voltage_at(g, with_power(g, 18.0), "MP") - 400.0, expected, 1e-9);
}

TEST(Grid, ConsumptionGivesEqualDrop) {
  const GridSpec g = single_string();
  const double rise = voltage_at(g, with_power(g, 18.0), "MP") - 400.0;
  const double drop = 400.0 - voltage_at(g, with_power(g, -18.0), "MP");
  EXPECT_NEAR(rise, drop, 1e-9);
  EXPECT_DOUBLE_EQ(voltage_at(g, with_power(g, 0.0), "MP"), 400.0);
}

TEST(Grid, UnknownMeasuringPoint) {
  const GridSpec g = single_string();
  EXPECT_THROW(voltage_at(g, initial_state(g), "nope"), UnknownMeasuringPoint);
}

TEST(Grid, MonotoneInFeedInSetpoint) {
  const GridSpec g = default_grid();
  std::mt19937_64 rng(2404);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const char* controllable[] = {"PVI1", "PVI2", "BSSI"};
  for (int trial = 0; trial < 1000; ++trial) {
    ProcessState s = initial_state(g);
    for (const char* a : controllable) s.active_power[a] = u(rng) * g.asset(a)->nominal_kw;
    const char* raised = controllable[rng() % 3];
    ProcessState t = s;
    t.active_power[raised] += std::abs(u(rng)) * g.asset(raised)->nominal_kw;
    for (const auto& mp : g.measuring_points) {
      EXPECT_GE(voltage_at(g, t, mp.name), voltage_at(g, s, mp.name)) << raised << " at " << mp.name;
    }
  }
}

TEST(Grid, MonotoneThroughTheDynamics) {
  const GridSpec g = default_grid();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    ProcessState base = initial_state(g);
    const double pv1 = u(rng);
    const double pv2 = u(rng);
    base = apply_setpoint(g, base, "PVI1", pv1);
    base = apply_setpoint(g, base, "PVI2", pv2);
    ProcessState higher = apply_setpoint(g, base, "PVI2", std::min(1.0, pv2 + std::abs(u(rng))));
    base = settle(g, base, 6.0);
    higher = settle(g, higher, 6.0);
    EXPECT_GE(higher.voltages.at("MP3"), base.voltages.at("MP3"));
    EXPECT_DOUBLE_EQ(higher.voltages.at("MP2"), base.voltages.at("MP2"));
  }
}

TEST(Grid, HalfSetpointReachesEighteenKilowatts) {
  const GridSpec g = default_grid();
  ProcessState s = apply_setpoint(g, initial_state(g), "PVI2", 0.0);
  s = settle(g, s, 30.0);
  EXPECT_DOUBLE_EQ(s.active_power.at("PVI2"), 0.0);
  s = apply_setpoint(g, s, "PVI2", 0.5);
  // Nothing happens before the next control-cycle boundary.
  ProcessState early = step(g, s, 0.9);
  EXPECT_DOUBLE_EQ(early.active_power.at("PVI2"), 0.0);
  s = settle(g, s, 30.0);
  EXPECT_NEAR(s.active_power.at("PVI2"), 18.0, 1e-9);
  EXPECT_GT(s.voltages.at("MP3"), 400.0);
}

TEST(Grid, NegativeBatterySetpointCharges) {
  const GridSpec g = default_grid();
  ProcessState s = apply_setpoint(g, initial_state(g), "BSSI", -0.4167);
  s = settle(g, s, 30.0);
  EXPECT_NEAR(s.active_power.at("BSSI"), -0.4167 * 22.0, 1e-6);
}

TEST(Grid, SetpointsAreClamped) {
  const GridSpec g = default_grid();
  ProcessState s = apply_setpoint(g, initial_state(g), "PVI1", 3.0);
  s = settle(g, s, 6.0);
  EXPECT_DOUBLE_EQ(s.setpoints.at("PVI1"), 1.0);
  EXPECT_NEAR(s.active_power.at("PVI1"), 12.0, 1e-9);
}

TEST(Grid, ConstantSetpointsReachAFixedPoint) {
  const GridSpec g = default_grid();
  ProcessState s = apply_setpoint(g, initial_state(g), "PVI2", 0.3);
  s = settle(g, s, 20.0);
  ProcessState next = step(g, s, 0.1);
  next.time = s.time;
  EXPECT_EQ(next, s);
}

TEST(Grid, CommandErrors) {
  const GridSpec g = default_grid();
  EXPECT_THROW(apply_setpoint(g, initial_state(g), "PVI9", 0.5), UnknownAsset);
  EXPECT_THROW(apply_setpoint(g, initial_state(g), "LOAD1", 0.5), NotControllable);
  EXPECT_THROW(step(g, initial_state(g), 0.0), GridError);
}

TEST(Grid, InvalidSpecsRejected) {
  GridSpec g = default_grid();
  g.segments[0].length_m = 0.0;
  EXPECT_THROW(g.validate(), GridError);
  g = default_grid();
  g.measuring_points[0].upstream_segments.push_back("S9");
  EXPECT_THROW(g.validate(), GridError);
}

TEST(Grid, VoltagesStayWithinSanityBand) {
  const GridSpec g = default_grid(0.0, 0.0);
  for (double v : {-1.0, 1.0}) {
    ProcessState s = initial_state(g);
    for (const char* a : {"PVI1", "PVI2", "BSSI"}) s = apply_setpoint(g, s, a, v);
    s = settle(g, s, 6.0);
    for (const auto& [mp, volts] : s.voltages) {
      EXPECT_GE(volts, 0.85 * 400.0) << mp;
      EXPECT_LE(volts, 1.15 * 400.0) << mp;
    }
  }
}

TEST(Grid, IdenticalTimelinesGiveIdenticalSeries) {
  auto run = [] {
    GridModel m(default_grid());
    m.apply_setpoint("PVI2", 0.3);
    for (int i = 1; i <= 50; ++i) {
      m.advance_to(i * 0.1);
      if (i % 10 == 0) m.sample();
      if (i == 25) m.apply_setpoint("BSSI", -0.2);
    }
    std::ostringstream out;
    m.write_csv(out);
    return out.str();
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(a.rfind("time_s,name,quantity,value\n", 0), 0U);
}

}  // namespace
