#include <gtest/gtest.h>

#include "fdilab/mitm/agent.hpp"
#include "fdilab/mitm/proxy_core.hpp"
#include "fdilab/scenario/scenario.hpp"
#include "support.hpp"

namespace {

using namespace fdilab;
using namespace fdilab::mitm;
using iec104::Apdu;
using iec104::make_i_frame;
using iec104::make_s_frame;

TEST(Correction, AckTowardMtuDiscountsInjectedFrames) {
  CorrectionState cs;
  cs.inj_to_rtu = 1;
  cs.correct_to_mtu = true;
  const Apdu out = correct_sequences(make_s_frame(8), Direction::ToMtu, cs);
  EXPECT_EQ(out.apci.rx, 7);
}

TEST(Correction, WrapsModulo32768) {
  CorrectionState cs;
  cs.inj_to_rtu = 1;
  cs.correct_to_mtu = true;
  EXPECT_EQ(correct_sequences(make_s_frame(0), Direction::ToMtu, cs).apci.rx, 32767);
  CorrectionState fwd;
  fwd.inj_to_rtu = 1;
  const Apdu i = make_i_frame(32767, 5, testkit::setpoint(3, 1003, 0.1F));
  EXPECT_EQ(correct_sequences(i, Direction::ToRtu, fwd).apci.tx, 0);
}

TEST(Correction, ZeroCountsAreIdentity) {
  std::mt19937_64 rng(1);
  CorrectionState cs;
  cs.correct_to_rtu = true;
  cs.correct_to_mtu = true;
  for (int i = 0; i < 1000; ++i) {
    const Apdu a = testkit::random_apdu(rng);
    EXPECT_EQ(correct_sequences(a, Direction::ToRtu, cs), a);
    EXPECT_EQ(correct_sequences(a, Direction::ToMtu, cs), a);
  }
}

TEST(Correction, DisabledDirectionIsUntouched) {
  CorrectionState cs;
  cs.inj_to_rtu = 3;
  cs.inj_to_mtu = 2;
  cs.correct_to_rtu = false;
  cs.correct_to_mtu = false;
  const Apdu a = make_i_frame(10, 20, testkit::setpoint(3, 1003, 0.1F));
  EXPECT_EQ(correct_sequences(a, Direction::ToRtu, cs), a);
  EXPECT_EQ(correct_sequences(a, Direction::ToMtu, cs), a);
}

TEST(Correction, SoundAgainstDualCounterReference) {
  std::size_t interventions = 0;
  for (std::uint64_t seed = 1; seed <= 3000; ++seed) {
    const auto r = testkit::run_correction_trial(seed, 100, 10);
    interventions += r.injections + r.drops;
    ASSERT_EQ(r.mismatches, 0U) << "seed " << seed << ": " << r.first_mismatch;
    ASSERT_EQ(r.endpoint_rejections, 0U) << "seed " << seed;
  }
  EXPECT_GT(interventions, 3000U);
}

TEST(Correction, StrictReceiverAbortsWithoutCorrection) {
  ProxyOptions opts;
  opts.correct_to_rtu = false;
  ProxyCore proxy(opts);
  endpoints::SequenceState mtu;
  endpoints::SequenceState rtu({.strict = true});
  auto send = [&] {
    const auto apci = mtu.next_i_frame();
    const auto out = proxy.forward(Direction::ToRtu, make_i_frame(apci.tx, apci.rx, testkit::setpoint(3, 1003, 0.1F)), 0.0);
    return rtu.on_i_frame(out->apci.tx, out->apci.rx);
  };
  EXPECT_EQ(send(), endpoints::SeqCheck::Ok);
  const Apdu forged = proxy.inject(Direction::ToRtu, testkit::setpoint(3, 1003, -0.4167F));
  EXPECT_EQ(rtu.on_i_frame(forged.apci.tx, forged.apci.rx), endpoints::SeqCheck::Ok);
  EXPECT_EQ(send(), endpoints::SeqCheck::OutOfOrder);
}

TEST(ProxyCore, ForwardsUnchangedWithoutInterventions) {
  ProxyCore proxy;
  std::mt19937_64 rng(5);
  std::uint16_t tx[2] = {0, 0};
  for (int i = 0; i < 500; ++i) {
    const auto dir = i % 3 == 0 ? Direction::ToMtu : Direction::ToRtu;
    auto& t = tx[dir == Direction::ToRtu ? 0 : 1];
    const Apdu a = make_i_frame(t, tx[dir == Direction::ToRtu ? 1 : 0], testkit::measurement(3, 2003, static_cast<float>(i)));
    t = iec104::seq_add(t, 1);
    const auto out = proxy.forward(dir, a, 0.0);
    ASSERT_TRUE(out);
    EXPECT_EQ(iec104::encode(*out), iec104::encode(a));
  }
  EXPECT_EQ(proxy.stats().forwarded, 500U);
}

TEST(ProxyCore, OpaqueBodiesPassBitExact) {
  ProxyCore proxy;
  (void)proxy.inject(Direction::ToRtu, testkit::setpoint(3, 1003, 0.5F));
  Apdu a;
  a.apci.kind = iec104::FrameKind::I;
  a.apci.tx = 0;
  a.apci.rx = 0;
  a.body = iec104::OpaqueAsdu{{0x2D, 0x01, 0x06, 0x00, 0x03, 0x00, 0xEB, 0x03, 0x00, 0x01}};
  const auto out = proxy.forward(Direction::ToRtu, a, 0.0);
  ASSERT_TRUE(out);
  EXPECT_EQ(out->body, a.body);
  EXPECT_EQ(out->apci.tx, 1);
}

Action rule(ActionKind kind, Direction dir, std::uint32_t ioa) {
  Action a;
  a.kind = kind;
  a.direction = dir;
  a.match = Match{iec104::TypeId::M_ME_NC_1, std::nullopt, ioa, std::nullopt};
  return a;
}

TEST(ProxyCore, ModifyScalesMatchingValues) {
  ProxyCore proxy;
  Action m = rule(ActionKind::Modify, Direction::ToMtu, 2002);
  m.rewrite.scale = 0.0;
  proxy.add_rule(m);
  auto out = proxy.forward(Direction::ToMtu, make_i_frame(0, 0, testkit::measurement(4, 2002, 35.9F)), 1.0);
  ASSERT_TRUE(out);
  EXPECT_EQ(out->asdu()->objects[0].value, 0.0F);
  out = proxy.forward(Direction::ToMtu, make_i_frame(1, 0, testkit::measurement(4, 2001, 7.0F)), 1.0);
  EXPECT_EQ(out->asdu()->objects[0].value, 7.0F);
  out = proxy.forward(Direction::ToRtu, make_i_frame(0, 0, testkit::measurement(4, 2002, 7.0F)), 1.0);
  EXPECT_EQ(out->asdu()->objects[0].value, 7.0F);
  EXPECT_EQ(proxy.stats().modified, 1U);
}

TEST(ProxyCore, ModifyHonoursActivationWindow) {
  ProxyCore proxy;
  Action m = rule(ActionKind::Modify, Direction::ToMtu, 2002);
  m.rewrite.offset = 5.0;
  m.at_time = 10.0;
  m.until = 20.0;
  proxy.add_rule(m);
  std::uint16_t tx = 0;
  auto value_at = [&](double t) {
    return proxy.forward(Direction::ToMtu, make_i_frame(tx++, 0, testkit::measurement(4, 2002, 1.0F)), t)->asdu()->objects[0].value;
  };
  EXPECT_EQ(value_at(5.0), 1.0F);
  EXPECT_EQ(value_at(15.0), 6.0F);
  EXPECT_EQ(value_at(25.0), 1.0F);
}

TEST(ProxyCore, DropRemovesFrameAndCountsIt) {
  ProxyCore proxy({true, true, false});
  proxy.add_rule(rule(ActionKind::Drop, Direction::ToMtu, 2003));
  EXPECT_FALSE(proxy.forward(Direction::ToMtu, make_i_frame(0, 0, testkit::measurement(3, 2003, 1.0F)), 0.0));
  EXPECT_EQ(proxy.counts().drop_to_mtu, 1U);
  const auto next = proxy.forward(Direction::ToMtu, make_i_frame(1, 0, testkit::measurement(3, 2004, 1.0F)), 0.0);
  ASSERT_TRUE(next);
  EXPECT_EQ(next->apci.tx, 0);
  EXPECT_FALSE(proxy.forward(Direction::ToMtu, make_s_frame(0), 0.0)->is_i());
}

TEST(ProxyCore, CollectKeepsBoundedCopies) {
  ProxyCore proxy;
  proxy.set_collect_capacity(3);
  Action c;
  c.kind = ActionKind::Collect;
  c.direction = Direction::ToMtu;
  proxy.add_rule(c);
  for (int i = 0; i < 5; ++i) {
    (void)proxy.forward(Direction::ToMtu, make_i_frame(static_cast<std::uint16_t>(i), 0, testkit::measurement(3, 2003, static_cast<float>(i))), i);
  }
  ASSERT_EQ(proxy.collected().size(), 3U);
  EXPECT_EQ(proxy.collected().front().asdu.objects[0].value, 2.0F);
  proxy.clear_rules();
  EXPECT_EQ(proxy.rule_count(), 0U);
}

TEST(ProxyCore, SwallowsRepliesToInjectedCommands) {
  ProxyCore proxy({true, true, true});
  (void)proxy.inject(Direction::ToRtu, testkit::setpoint(3, 1003, -0.4167F));
  const auto con = testkit::setpoint(3, 1003, -0.4167F, iec104::Cot::ActivationCon);
  const auto term = testkit::setpoint(3, 1003, -0.4167F, iec104::Cot::ActivationTerm);
  EXPECT_FALSE(proxy.forward(Direction::ToMtu, make_i_frame(0, 1, con), 0.0));
  EXPECT_FALSE(proxy.forward(Direction::ToMtu, make_i_frame(1, 1, term), 0.0));
  // A later legitimate reply for the same object is forwarded.
  EXPECT_TRUE(proxy.forward(Direction::ToMtu, make_i_frame(2, 1, con), 0.0));
  EXPECT_EQ(proxy.stats().swallowed, 2U);
}

TEST(ProxyCore, InjectedFrameContinuesTheSequence) {
  ProxyCore proxy;
  for (std::uint16_t i = 0; i < 4; ++i) {
    (void)proxy.forward(Direction::ToRtu, make_i_frame(i, 0, testkit::setpoint(3, 1003, 0.1F)), 0.0);
  }
  EXPECT_EQ(proxy.expected_tx(Direction::ToRtu), 4);
  const Apdu f = proxy.inject(Direction::ToRtu, testkit::setpoint(3, 1003, 0.2F));
  EXPECT_EQ(f.apci.tx, 4);
  EXPECT_EQ(proxy.counts().inj_to_rtu, 1U);
  const auto next = proxy.forward(Direction::ToRtu, make_i_frame(4, 0, testkit::setpoint(3, 1003, 0.1F)), 0.0);
  EXPECT_EQ(next->apci.tx, 5);
}

TEST(Action, JsonRoundtripAndValidation) {
  Action a;
  a.kind = ActionKind::Inject;
  a.direction = Direction::ToRtu;
  a.forge = Forge{iec104::TypeId::C_SE_NC_1, iec104::Cot::Activation, 4, 1002, 1.0F};
  a.at_time = 600.0;
  EXPECT_EQ(action_from_json(to_json(a)), a);
  Action m = rule(ActionKind::Modify, Direction::ToMtu, 2002);
  m.rewrite = {0.5, 1.0};
  m.until = 700.0;
  EXPECT_EQ(action_from_json(to_json(m)), m);

  Action bad;
  bad.kind = ActionKind::Inject;
  EXPECT_THROW(bad.validate(), InvalidAction);
  bad.kind = ActionKind::Drop;
  EXPECT_THROW(bad.validate(), InvalidAction);
  EXPECT_THROW(action_from_json(nlohmann::json{{"kind", "Explode"}}), InvalidAction);
  EXPECT_THROW(action_from_json(nlohmann::json{{"kind", "Inject"}, {"forge", {{"ioa", 1}}}}), InvalidAction);
}

TEST(Agent, BridgeModeIsTransparent) {
  auto s = scenario::builtin("paper-experiment", 3);
  s.compression = 0.0;
  s.duration = 300.0;
  s.coordinator.reset();
  const auto b = scenario::run(s);
  const auto& cable = b.agent_traces.at("agent1");
  std::vector<net::Bytes> at_switch;
  std::vector<net::Bytes> at_cable;
  const auto rtu3 = testkit::ip(13);
  for (const auto& f : b.switch_trace.frames) {
    if (f.src.ip == rtu3 && net::to_seconds(f.timestamp) < 299.0) at_switch.push_back(f.payload);
  }
  // Frames still in flight at the end of the run are only on the cable.
  for (const auto& f : cable.frames) {
    if (f.src.ip == rtu3 && net::to_seconds(f.timestamp) < 299.0) at_cable.push_back(f.payload);
  }
  ASSERT_GT(at_switch.size(), 200U);
  ASSERT_EQ(at_switch.size(), at_cable.size());
  for (std::size_t i = 0; i < at_switch.size(); ++i) ASSERT_EQ(at_switch[i], at_cable[i]) << i;
  for (const auto& f : b.switch_trace.frames) {
    if (f.src.ip == rtu3) {
      EXPECT_EQ(f.src.mac, testkit::mac(13));
    }
  }
  EXPECT_EQ(b.report.count(ids::Indicator::MacIpInconsistency), 0U);
}

TEST(Agent, InterceptingReemitsUnderAgentMac) {
  auto s = scenario::builtin("paper-experiment", 1);
  s.compression = 0.0;
  const auto b = scenario::run(s);
  bool agent_mac_seen = false;
  for (const auto& f : b.switch_trace.frames) {
    if (f.src.ip == testkit::ip(13) && net::to_seconds(f.timestamp) > 730.0) {
      agent_mac_seen = agent_mac_seen || f.src.mac == testkit::mac(16);
    }
  }
  EXPECT_TRUE(agent_mac_seen);
  const auto& agents = b.run_report["agents"];
  ASSERT_EQ(agents.size(), 2U);
  for (const auto& a : agents) {
    EXPECT_TRUE(a["intercepting"].get<bool>());
    EXPECT_EQ(a["stats"]["injected"].get<int>(), 1);
    EXPECT_EQ(a["state"].get<std::string>(), "ActionDone");
  }
}

}  // namespace
