#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "fdilab/ids/detectors.hpp"
#include "fdilab/scenario/scenario.hpp"
#include "support.hpp"

namespace {

using namespace fdilab;
using namespace fdilab::ids;
using iec104::Cot;
using iec104::make_i_frame;
using iec104::make_s_frame;
using testkit::addr;
using testkit::ip;
using testkit::TraceBuilder;

constexpr std::uint16_t kClientPort = 49152;

TraceBuilder lab() {
  TraceBuilder tb;
  tb.register_node("MTU", 10, kClientPort);
  for (int h = 11; h <= 14; ++h) tb.register_node("RTU" + std::to_string(h - 10), h, 2404);
  return tb;
}

// The MTU sends n I-frames to RTU3; each is acknowledged after rtt_ms(i).
template <typename F>
net::Trace rtt_trace(int n, F rtt_ms) {
  TraceBuilder tb = lab();
  const auto mtu = addr(10, kClientPort);
  const auto rtu = addr(13, 2404);
  for (int i = 0; i < n; ++i) {
    const double t = 1.0 + i;
    tb.apdu(t, mtu, rtu, make_i_frame(static_cast<std::uint16_t>(i), 0, testkit::interrogation(3)));
    tb.apdu(t + rtt_ms(i) / 1000.0, rtu, mtu, make_s_frame(static_cast<std::uint16_t>(i + 1)));
  }
  return tb.trace();
}

double brute_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TEST(Stats, MedianAndMad) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_DOUBLE_EQ(median_absolute_deviation({1.0, 2.0, 3.0, 4.0, 100.0}), 1.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 50);
    for (auto& x : v) x = u(rng);
    const double m = brute_median(v);
    std::vector<double> dev;
    for (double x : v) dev.push_back(std::abs(x - m));
    EXPECT_DOUBLE_EQ(median(v), m);
    EXPECT_DOUBLE_EQ(median_absolute_deviation(v), brute_median(dev));
  }
}

TEST(MacIp, MidFlowMacChangeFlagged) {
  TraceBuilder tb = lab();
  const auto mtu = addr(10, kClientPort);
  const auto rtu = addr(13, 2404);
  net::Address forged = rtu;
  forged.mac = testkit::mac(16);
  for (int i = 0; i < 10; ++i) tb.apdu(1.0 + i, rtu, mtu, make_i_frame(static_cast<std::uint16_t>(i), 0, testkit::measurement(3, 2003, 1.0F)));
  for (int i = 10; i < 20; ++i) tb.apdu(1.0 + i, forged, mtu, make_i_frame(static_cast<std::uint16_t>(i), 0, testkit::measurement(3, 2003, 1.0F)));
  const auto alerts = detect_mac_ip(tb.trace());
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_EQ(alerts[0].flow_id, tb.trace().frames[10].flow_id);
  ASSERT_FALSE(alerts[0].evidence.empty());
  EXPECT_EQ(alerts[0].evidence.front(), 10U);
  EXPECT_EQ(alerts[0].evidence.size(), 10U);
}

TEST(MacIp, ConsistentTraceIsQuiet) {
  EXPECT_TRUE(detect_mac_ip(rtt_trace(30, [](int) { return 2.0; })).empty());
}

TEST(NewParticipant, EachUnknownAddressAlertsOnce) {
  TraceBuilder tb = lab();
  for (int i = 0; i < 5; ++i) {
    tb.raw(1.0 + i, addr(19, 40000), addr(16, 4711), net::PayloadKind::C2, {1, 2, 3});
    tb.raw(1.5 + i, addr(20, 40001), addr(10, 4711), net::PayloadKind::C2, {1, 2, 3});
  }
  const auto alerts = detect_new_participant(tb.trace(), {ip(10), ip(11), ip(12), ip(13), ip(14), ip(16)});
  ASSERT_EQ(alerts.size(), 2U);
  EXPECT_NE(alerts[0].detail.find("10.0.104.19"), std::string::npos);
  EXPECT_NE(alerts[1].detail.find("10.0.104.20"), std::string::npos);
  EXPECT_THROW(detect_new_participant(tb.trace(), {}), std::invalid_argument);
}

TEST(Rtt, SingleSpikeIsTheOnlyOutlier) {
  const auto rtt = [](int i) { return i == 57 ? 50.0 : 2.0; };
  const net::Trace t = rtt_trace(100, rtt);
  std::vector<double> samples;
  for (int i = 0; i < 100; ++i) samples.push_back(rtt(i));
  const double med = brute_median(samples);
  std::vector<double> dev;
  for (double x : samples) dev.push_back(std::abs(x - med));
  const double threshold = med + 5.0 * std::max(brute_median(dev), 0.001);
  const auto expected = std::count_if(samples.begin(), samples.end(), [&](double x) { return x > threshold; });
  ASSERT_EQ(expected, 1);

  const auto alerts = detect_rtt_outliers(t);
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_EQ(alerts[0].evidence, (std::vector<std::size_t>{114, 115}));
  const auto r = analyze_one(t, Indicator::RttOutlier);
  ASSERT_EQ(r.rtt_flows.size(), 1U);
  EXPECT_EQ(r.rtt_flows[0].samples, 100U);
  EXPECT_NEAR(r.rtt_flows[0].median_ms, 2.0, 1e-5);
  EXPECT_EQ(r.rtt_flows[0].outliers, 1U);
}

TEST(Rtt, ConstantLatencyIsQuiet) {
  EXPECT_TRUE(detect_rtt_outliers(rtt_trace(200, [](int) { return 3.0; })).empty());
}

TEST(Rtt, ShortFlowGetsNoVerdict) {
  const auto r = analyze_one(rtt_trace(10, [](int i) { return i == 3 ? 90.0 : 1.0; }), Indicator::RttOutlier);
  EXPECT_TRUE(r.alerts.empty());
  ASSERT_EQ(r.rtt_flows.size(), 1U);
  EXPECT_TRUE(r.rtt_flows[0].too_short);
  EXPECT_EQ(summary_json(r)["rtt_flows"][0]["verdict"], "FlowTooShort");
}

TEST(FlowAnomaly, OrphanRepliesFormOneGroup) {
  TraceBuilder tb = lab();
  const auto mtu = addr(10, kClientPort);
  const auto rtu = addr(13, 2404);
  tb.apdu(1.0, mtu, rtu, make_i_frame(0, 0, testkit::setpoint(3, 1003, 0.2F)));
  tb.apdu(1.1, rtu, mtu, make_i_frame(0, 1, testkit::setpoint(3, 1003, 0.2F, Cot::ActivationCon)));
  tb.apdu(1.2, rtu, mtu, make_i_frame(1, 1, testkit::setpoint(3, 1003, 0.2F, Cot::ActivationTerm)));
  tb.apdu(5.0, rtu, mtu, make_i_frame(2, 1, testkit::setpoint(3, 1003, -0.4F, Cot::ActivationCon)));
  tb.apdu(5.1, rtu, mtu, make_i_frame(3, 1, testkit::setpoint(3, 1003, -0.4F, Cot::ActivationTerm)));
  const auto alerts = detect_flow_anomaly(tb.trace());
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_EQ(alerts[0].evidence, (std::vector<std::size_t>{3, 4}));
  EXPECT_NE(alerts[0].detail.find("ActTerm"), std::string::npos);
}

TEST(FlowAnomaly, UnconfirmedActivationTimesOut) {
  TraceBuilder tb = lab();
  const auto mtu = addr(10, kClientPort);
  const auto rtu = addr(13, 2404);
  tb.apdu(1.0, mtu, rtu, make_i_frame(0, 0, testkit::setpoint(3, 1003, 0.2F)));
  tb.apdu(30.0, rtu, mtu, make_s_frame(1));
  const auto alerts = detect_flow_anomaly(tb.trace());
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_DOUBLE_EQ(alerts[0].t, 11.0);
}

TEST(SeqInconsistency, AckBeyondObservedFrames) {
  TraceBuilder tb = lab();
  const auto mtu = addr(10, kClientPort);
  const auto rtu = addr(13, 2404);
  tb.control(0.5, mtu, rtu, net::Control::Open);
  tb.apdu(1.0, mtu, rtu, make_i_frame(0, 0, testkit::setpoint(3, 1003, 0.2F)));
  tb.apdu(1.1, rtu, mtu, make_s_frame(1));
  tb.apdu(2.0, rtu, mtu, make_s_frame(2));
  const auto alerts = detect_seq_inconsistency(tb.trace());
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_EQ(alerts[0].evidence, (std::vector<std::size_t>{3}));
}

TEST(SeqInconsistency, AgreesWithBruteForceReference) {
  std::size_t alerting = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const net::Trace t = testkit::random_seq_trace(seed, 200);
    const auto reference = testkit::seq_oracle(t);
    const auto got = detect_seq_inconsistency(t);
    ASSERT_EQ(got.size(), reference.size()) << "seed " << seed;
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_EQ(got[i].evidence.front(), reference[i].frame_index) << "seed " << seed;
    }
    alerting += got.empty() ? 0 : 1;
  }
  EXPECT_GT(alerting, 100U);
}

net::Trace command_trace(std::vector<std::pair<std::uint16_t, float>> commands) {
  TraceBuilder tb = lab();
  const auto mtu = addr(10, kClientPort);
  std::uint16_t tx = 0;
  for (const auto& [ca, value] : commands) {
    const std::uint32_t ioa = ca == 4 ? 1002 : 1003;
    tb.apdu(1.0 + tx, mtu, addr(10 + ca, 2404), make_i_frame(tx, 0, testkit::setpoint(ca, ioa, value)));
    ++tx;
  }
  return tb.trace();
}

TEST(ProcessPlausibility, FullFeedInCommandOutOfRange) {
  const auto alerts = detect_process_implausible(command_trace({{4, 0.3F}, {4, 0.5F}, {4, 1.0F}}), default_policy());
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_EQ(alerts[0].evidence, (std::vector<std::size_t>{2}));
}

TEST(ProcessPlausibility, LargeBatteryStepFlagged) {
  const auto ok = detect_process_implausible(command_trace({{3, 0.21F}, {3, 0.42F}}), default_policy());
  EXPECT_TRUE(ok.empty());
  const auto alerts = detect_process_implausible(command_trace({{3, 0.42F}, {3, -0.42F}}), default_policy());
  ASSERT_EQ(alerts.size(), 1U);
  EXPECT_NE(alerts[0].detail.find("step"), std::string::npos) << alerts[0].detail;
}

TEST(Policy, JsonRoundtripAndErrors) {
  const Policy p = default_policy();
  const Policy back = policy_from_json(to_json(p));
  ASSERT_EQ(back.entries.size(), p.entries.size());
  EXPECT_NE(back.find(4, 1002), nullptr);
  nlohmann::json bad;
  bad["entries"] = nlohmann::json::array({{{"ca", 1}, {"ioa", 1}, {"min", 1.0}, {"max", 0.0}, {"max_step", 1.0}}});
  try {
    (void)policy_from_json(bad);
    FAIL();
  } catch (const PolicyError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("entries[0].max", 0), 0U) << e.what();
  }
  EXPECT_THROW(policy_from_json(nlohmann::json{{"entries", 3}}), PolicyError);
}

TEST(Report, EmptyTraceGivesEmptyResult) {
  net::Trace t;
  const auto r = analyze(t, DetectorOptions{{ip(10)}});
  EXPECT_EQ(r.frames, 0U);
  EXPECT_TRUE(r.alerts.empty());
  EXPECT_TRUE(r.rtt.empty());
}

net::Trace attack_trace() {
  auto s = scenario::builtin("paper-experiment", 2);
  s.compression = 0.0;
  return scenario::run(s).switch_trace;
}

TEST(Report, AnalyzeEqualsUnionOfSingleIndicators) {
  const net::Trace t = attack_trace();
  const auto all = analyze(t);
  std::vector<Alert> merged;
  for (auto i : kAllIndicators) {
    const auto one = analyze_one(t, i);
    EXPECT_EQ(one.count(i), all.count(i)) << to_string(i);
    merged.insert(merged.end(), one.alerts.begin(), one.alerts.end());
  }
  sort_alerts(merged);
  EXPECT_EQ(merged, all.alerts);
  std::size_t kinds = 0;
  for (auto i : kAllIndicators) kinds += all.count(i) > 0 ? 1 : 0;
  EXPECT_GE(kinds, 4U);
}

TEST(Report, DeterministicAndSerialisable) {
  const net::Trace t = attack_trace();
  std::ostringstream a;
  std::ostringstream b;
  write_alerts(a, analyze(t).alerts);
  write_alerts(b, analyze(t).alerts);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  EXPECT_EQ(read_alerts(in), analyze(t).alerts);
}

}  // namespace
