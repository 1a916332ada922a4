#pragma once

// Shared fixtures and reference models for the unit and acceptance tests.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fdilab/endpoints/sequence_state.hpp"
#include "fdilab/iec104/codec.hpp"
#include "fdilab/mitm/proxy_core.hpp"
#include "fdilab/net/trace.hpp"

namespace fdilab::testkit {

using iec104::Apdu;
using iec104::Asdu;
using iec104::Cot;
using iec104::TypeId;

inline net::MacAddress mac(int host) {
  net::MacAddress m;
  m.octets = {0x02, 0x00, 0x0a, 0x00, 0x68, static_cast<std::uint8_t>(host)};
  return m;
}

inline net::Ipv4Address ip(int host) {
  return {(10U << 24) | (0U << 16) | (104U << 8) | static_cast<std::uint32_t>(host)};
}

inline net::EndpointIdentity identity(const std::string& name, int host, std::uint16_t port) {
  return {name, mac(host), ip(host), port};
}

inline net::Address addr(int host, std::uint16_t port) { return {mac(host), ip(host), port}; }

inline Asdu setpoint(std::uint16_t ca, std::uint32_t ioa, float value, Cot cot = Cot::Activation) {
  Asdu a;
  a.type_id = TypeId::C_SE_NC_1;
  a.cot = cot;
  a.common_address = ca;
  a.objects.push_back({ioa, value, 0, 0, false});
  return a;
}

inline Asdu measurement(std::uint16_t ca, std::uint32_t ioa, float value) {
  Asdu a;
  a.type_id = TypeId::M_ME_NC_1;
  a.cot = Cot::Periodic;
  a.common_address = ca;
  a.objects.push_back({ioa, value, 0, 0, false});
  return a;
}

inline Asdu interrogation(std::uint16_t ca, Cot cot = Cot::Activation) {
  Asdu a;
  a.type_id = TypeId::C_IC_NA_1;
  a.cot = cot;
  a.common_address = ca;
  a.objects.push_back({0, 0.0F, 0, iec104::kQoiStation, false});
  return a;
}

/// Random well-formed APDU covering every modelled frame and ASDU shape.
inline Apdu random_apdu(std::mt19937_64& rng) {
  auto pick = [&](std::uint64_t n) { return static_cast<std::uint64_t>(rng() % n); };
  const auto seq = [&] { return static_cast<std::uint16_t>(pick(iec104::kSeqModulus)); };
  switch (pick(6)) {
    case 0: return iec104::make_u_frame(static_cast<iec104::UFunction>(pick(6)));
    case 1: return iec104::make_s_frame(seq());
    case 2: {
      iec104::OpaqueAsdu opaque;
      const std::size_t n = 1 + pick(60);
      for (std::size_t i = 0; i < n; ++i) opaque.octets.push_back(static_cast<std::uint8_t>(rng()));
      // Keep it out of the modelled type ids so it stays opaque after decode.
      opaque.octets[0] = static_cast<std::uint8_t>(120 + pick(100));
      Apdu a;
      a.apci.kind = iec104::FrameKind::I;
      a.apci.tx = seq();
      a.apci.rx = seq();
      a.body = opaque;
      return a;
    }
    default: break;
  }
  static constexpr TypeId kTypes[] = {TypeId::M_SP_NA_1, TypeId::M_ME_NC_1, TypeId::C_SE_NC_1, TypeId::C_IC_NA_1};
  static constexpr std::size_t kElement[] = {1, 5, 5, 1};
  const std::size_t t = pick(4);
  Asdu asdu;
  asdu.type_id = kTypes[t];
  asdu.cot = static_cast<Cot>(1 + pick(63));
  asdu.negative_confirm = pick(2) == 1;
  asdu.test_flag = pick(2) == 1;
  asdu.originator = static_cast<std::uint8_t>(rng());
  asdu.common_address = static_cast<std::uint16_t>(1 + pick(65534));
  const std::size_t max_objects = (iec104::kMaxApduLength - 4 - 6) / (3 + kElement[t]);
  const std::size_t n = 1 + pick(std::min<std::size_t>(max_objects, 127));
  std::uniform_real_distribution<float> sp(-1.5F, 1.5F);
  std::uniform_real_distribution<float> mv(-1e6F, 1e6F);
  for (std::size_t i = 0; i < n; ++i) {
    iec104::InformationObject o;
    o.ioa = static_cast<std::uint32_t>(pick(1U << 24));
    switch (asdu.type_id) {
      case TypeId::M_SP_NA_1:
        o.value = pick(2) == 1 ? 1.0F : 0.0F;
        o.quality = static_cast<std::uint8_t>(pick(16) << 4);
        break;
      case TypeId::M_ME_NC_1:
        o.value = mv(rng);
        o.quality = static_cast<std::uint8_t>(rng());
        break;
      case TypeId::C_SE_NC_1:
        o.value = sp(rng);
        o.qualifier = static_cast<std::uint8_t>(pick(128));
        o.select = pick(2) == 1;
        break;
      case TypeId::C_IC_NA_1:
        o.qualifier = static_cast<std::uint8_t>(rng());
        break;
    }
    asdu.objects.push_back(o);
  }
  return iec104::make_i_frame(seq(), seq(), asdu);
}

/// Builds synthetic traces frame by frame; flow ids follow first appearance.
class TraceBuilder {
 public:
  TraceBuilder() { trace_.meta.scenario = "synthetic"; }

  void register_node(const std::string& name, int host, std::uint16_t port) {
    trace_.registry.push_back(identity(name, host, port));
  }

  net::Frame& raw(double t, const net::Address& src, const net::Address& dst, net::PayloadKind kind,
                  net::Bytes payload) {
    net::Frame f;
    f.timestamp = net::from_seconds(t);
    f.src = src;
    f.dst = dst;
    f.kind = kind;
    f.payload = std::move(payload);
    auto [it, inserted] = ids_.try_emplace(f.flow_key(), static_cast<net::FlowId>(ids_.size() + 1));
    f.flow_id = it->second;
    trace_.frames.push_back(std::move(f));
    return trace_.frames.back();
  }

  net::Frame& apdu(double t, const net::Address& src, const net::Address& dst, const Apdu& a) {
    return raw(t, src, dst, net::PayloadKind::Iec104, iec104::encode(a));
  }

  net::Frame& control(double t, const net::Address& src, const net::Address& dst, net::Control c) {
    return raw(t, src, dst, net::PayloadKind::Other, net::control_payload(c));
  }

  [[nodiscard]] const net::Trace& trace() const { return trace_; }
  net::Trace& trace() { return trace_; }

 private:
  net::Trace trace_;
  std::map<net::FlowKey, net::FlowId> ids_;
};

// ---- Dual-counter reference for sequence correction -------------------------
//
// Each direction through the proxy is an ordered log of events: a genuine
// frame forwarded (F), dropped (D), or a frame the proxy injected (I). A
// receiver numbers what it got: F and I. A sender numbers what it sent: F and
// D. Correct rewriting maps one numbering onto the other.

struct StreamLog {
  std::vector<char> events;

  // Position in the receiver's numbering of the next emitted frame.
  [[nodiscard]] std::uint64_t received_count() const {
    std::uint64_t n = 0;
    for (char e : events) n += (e == 'F' || e == 'I') ? 1 : 0;
    return n;
  }

  // Sender-numbering count covered by a receiver acknowledgement of n:
  // genuine frames up to the n-th received one plus drops that follow it
  // before anything else reached the receiver.
  [[nodiscard]] std::uint64_t sender_count_for_ack(std::uint64_t n) const {
    std::uint64_t received = 0;
    std::uint64_t sent = 0;
    std::size_t i = 0;
    for (; i < events.size() && received < n; ++i) {
      if (events[i] != 'D') ++received;
      if (events[i] != 'I') ++sent;
    }
    for (; i < events.size() && events[i] == 'D'; ++i) ++sent;
    return sent;
  }
};

struct CorrectionTrialResult {
  std::size_t frames = 0;
  std::size_t injections = 0;
  std::size_t drops = 0;
  std::size_t mismatches = 0;
  std::size_t endpoint_rejections = 0;
  std::string first_mismatch;
};

/// Drives two strict endpoints through a random interleaving with the proxy
/// between them and compares every rewritten sequence field with the
/// reference numbering.
inline CorrectionTrialResult run_correction_trial(std::uint64_t seed, std::size_t max_frames,
                                                  std::size_t max_interventions) {
  using mitm::Direction;
  std::mt19937_64 rng(seed);
  const std::size_t frames = 1 + rng() % max_frames;
  std::size_t budget = rng() % (max_interventions + 1);

  endpoints::SequenceParams strict;
  strict.strict = true;
  endpoints::SequenceState mtu(strict);
  endpoints::SequenceState rtu(strict);

  mitm::ProxyOptions opts;
  opts.correct_to_rtu = true;
  opts.correct_to_mtu = true;
  mitm::ProxyCore proxy(opts);
  for (auto dir : {Direction::ToRtu, Direction::ToMtu}) {
    mitm::Action drop;
    drop.kind = mitm::ActionKind::Drop;
    drop.direction = dir;
    drop.match = mitm::Match{std::nullopt, std::nullopt, 999, std::nullopt};
    proxy.add_rule(drop);
  }

  StreamLog to_rtu;
  StreamLog to_mtu;
  CorrectionTrialResult r;
  r.frames = frames;
  std::uint64_t received_by_mtu = 0;
  std::uint64_t received_by_rtu = 0;

  auto check = [&](bool ok, const std::string& what) {
    if (ok) return;
    if (r.mismatches++ == 0) r.first_mismatch = what;
  };

  for (std::size_t step = 0; step < frames; ++step) {
    const auto op = rng() % 8;
    const bool toward_rtu = op % 2 == 0;
    const Direction dir = toward_rtu ? Direction::ToRtu : Direction::ToMtu;
    auto& sender = toward_rtu ? mtu : rtu;
    auto& receiver = toward_rtu ? rtu : mtu;
    auto& log = toward_rtu ? to_rtu : to_mtu;
    auto& back = toward_rtu ? to_mtu : to_rtu;
    auto& receiver_count = toward_rtu ? received_by_rtu : received_by_mtu;
    const std::uint64_t sender_rx_raw = toward_rtu ? received_by_mtu : received_by_rtu;

    if (op >= 6 && budget > 0) {
      --budget;
      if (op == 6 && rng() % 2 == 0) {
        ++r.injections;
        const auto expected_tx = static_cast<std::uint16_t>(log.received_count() % iec104::kSeqModulus);
        const Apdu forged = proxy.inject(dir, toward_rtu ? setpoint(3, 1003, 0.5F) : measurement(3, 2003, 1.0F));
        log.events.push_back('I');
        check(forged.apci.tx == expected_tx, "injected tx");
        ++receiver_count;
        if (receiver.on_i_frame(forged.apci.tx, forged.apci.rx) != endpoints::SeqCheck::Ok) ++r.endpoint_rejections;
        continue;
      }
      ++r.drops;
      const iec104::Apci apci = sender.next_i_frame();
      const Apdu genuine = iec104::make_i_frame(apci.tx, apci.rx, toward_rtu ? setpoint(3, 999, 0.1F) : measurement(3, 999, 2.0F));
      const auto out = proxy.forward(dir, genuine, static_cast<double>(step));
      check(!out.has_value(), "drop rule did not drop");
      log.events.push_back('D');
      continue;
    }

    const bool i_frame = op < 4;
    const iec104::Apci apci = i_frame ? sender.next_i_frame() : sender.next_s_frame();
    const Apdu genuine = i_frame ? iec104::make_i_frame(apci.tx, apci.rx,
                                                        toward_rtu ? setpoint(3, 1003, 0.2F) : measurement(3, 2003, 3.0F))
                                 : iec104::make_s_frame(apci.rx);
    const auto expected_tx = static_cast<std::uint16_t>(log.received_count() % iec104::kSeqModulus);
    const auto expected_rx = static_cast<std::uint16_t>(back.sender_count_for_ack(sender_rx_raw) % iec104::kSeqModulus);
    const auto out = proxy.forward(dir, genuine, static_cast<double>(step));
    if (!out) {
      check(false, "genuine frame dropped");
      continue;
    }
    if (i_frame) {
      log.events.push_back('F');
      check(out->apci.tx == expected_tx, "tx at step " + std::to_string(step));
    }
    check(out->apci.rx == expected_rx, "rx at step " + std::to_string(step));
    endpoints::SeqCheck verdict = endpoints::SeqCheck::Ok;
    if (i_frame) {
      ++receiver_count;
      verdict = receiver.on_i_frame(out->apci.tx, out->apci.rx);
    } else {
      verdict = receiver.on_ack(out->apci.rx);
    }
    if (verdict != endpoints::SeqCheck::Ok) ++r.endpoint_rejections;
  }
  return r;
}

// ---- Brute-force reference for the sequence-inconsistency rule -------------

struct SeqOracleAlert {
  std::size_t frame_index;
  int ahead;
};

/// For each frame carrying rx, recounts from scratch the I-frames the other
/// side put on the wire since the connection opened (or since its first
/// observed I-frame) and reports every new maximum excess.
inline std::vector<SeqOracleAlert> seq_oracle(const net::Trace& trace) {
  struct Parsed {
    bool open = false;
    bool valid = false;
    bool from_server = false;
    net::FlowKey conn;  // client -> server
    Apdu apdu;
  };
  std::vector<Parsed> parsed(trace.frames.size());
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const auto& f = trace.frames[i];
    Parsed& p = parsed[i];
    p.from_server = f.src.port == iec104::kDefaultPort;
    if (!p.from_server && f.dst.port != iec104::kDefaultPort) continue;
    p.conn = p.from_server ? f.flow_key().reversed() : f.flow_key();
    if (f.control() == net::Control::Open) {
      p.open = !p.from_server;
      continue;
    }
    if (f.kind != net::PayloadKind::Iec104) continue;
    const auto d = iec104::decode(f.payload);
    if (!d.ok() || d.consumed != f.payload.size()) continue;
    p.valid = true;
    p.apdu = d.apdu;
  }

  std::vector<SeqOracleAlert> out;
  std::map<std::pair<net::FlowKey, bool>, int> best;
  for (std::size_t j = 0; j < parsed.size(); ++j) {
    const auto& pj = parsed[j];
    if (pj.open) {
      best[{pj.conn, false}] = 0;
      best[{pj.conn, true}] = 0;
      continue;
    }
    if (!pj.valid || pj.apdu.is_u()) continue;
    // Counting the peer's I-frames from the last open, scanning the prefix.
    const bool peer_is_server = !pj.from_server;
    std::optional<std::uint16_t> base;
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < j; ++i) {
      const auto& pi = parsed[i];
      if (pi.conn != pj.conn) continue;
      if (pi.open) {
        base = 0;
        count = 0;
        continue;
      }
      if (!pi.valid || !pi.apdu.is_i() || pi.from_server != peer_is_server) continue;
      if (!base) base = pi.apdu.apci.tx;
      ++count;
    }
    if (base) {
      std::uint16_t expected = *base;
      for (std::uint64_t c = 0; c < count; ++c) expected = static_cast<std::uint16_t>((expected + 1) % iec104::kSeqModulus);
      int ahead = static_cast<int>(pj.apdu.apci.rx) - static_cast<int>(expected);
      while (ahead >= 16384) ahead -= 32768;
      while (ahead < -16384) ahead += 32768;
      int& b = best[{pj.conn, peer_is_server}];
      if (ahead > b) {
        b = ahead;
        out.push_back({j, ahead});
      }
    }
  }
  return out;
}

/// Random two-connection IEC-104 traffic with occasional acknowledgement
/// faults and reconnects.
inline net::Trace random_seq_trace(std::uint64_t seed, std::size_t max_frames) {
  std::mt19937_64 rng(seed);
  TraceBuilder tb;
  const std::size_t n = 1 + rng() % max_frames;
  struct Conn {
    int client_port;
    int server;
    std::uint16_t tx[2] = {0, 0};
    std::uint16_t rx[2] = {0, 0};
  };
  Conn conns[2] = {{49152, 11}, {49153, 12}};
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 0.01;
    Conn& c = conns[rng() % 2];
    const auto client = addr(10, static_cast<std::uint16_t>(c.client_port));
    const auto server = addr(c.server, iec104::kDefaultPort);
    const auto op = rng() % 20;
    if (op == 0) {
      tb.control(t, client, server, net::Control::Open);
      c.tx[0] = c.tx[1] = c.rx[0] = c.rx[1] = 0;
      continue;
    }
    const int side = static_cast<int>(rng() % 2);  // 0 client sends, 1 server sends
    const auto& src = side == 0 ? client : server;
    const auto& dst = side == 0 ? server : client;
    std::uint16_t rx = c.rx[side];
    if (op == 1) rx = static_cast<std::uint16_t>((rx + 1 + rng() % 3) % iec104::kSeqModulus);
    if (op == 2) c.tx[side] = static_cast<std::uint16_t>((c.tx[side] + 1) % iec104::kSeqModulus);
    if (op < 12) {
      tb.apdu(t, src, dst, iec104::make_i_frame(c.tx[side], rx, measurement(1, 1, 1.0F)));
      c.tx[side] = static_cast<std::uint16_t>((c.tx[side] + 1) % iec104::kSeqModulus);
      c.rx[1 - side] = c.tx[side];
    } else if (op < 16) {
      tb.apdu(t, src, dst, iec104::make_s_frame(rx));
    } else {
      tb.apdu(t, src, dst, iec104::make_u_frame(iec104::UFunction::TestFrAct));
    }
  }
  return tb.trace();
}

}  // namespace fdilab::testkit
