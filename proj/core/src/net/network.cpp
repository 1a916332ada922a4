#include "fdilab/net/network.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace fdilab::net {

// ---- addresses ----------------------------------------------------------

std::string MacAddress::str() const {
  char buf[18];
  std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1], octets[2],
                octets[3], octets[4], octets[5]);
  return buf;
}

std::optional<MacAddress> MacAddress::parse(std::string_view text) {
  MacAddress mac;
  if (text.size() != 17) return std::nullopt;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto part = text.substr(i * 3, 2);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value, 16);
    if (ec != std::errc() || ptr != part.data() + part.size()) return std::nullopt;
    if (i < 5 && text[i * 3 + 2] != ':') return std::nullopt;
    mac.octets[i] = static_cast<std::uint8_t>(value);
  }
  return mac;
}

std::string Ipv4Address::str() const {
  return std::to_string((value >> 24) & 0xFF) + "." + std::to_string((value >> 16) & 0xFF) + "." +
         std::to_string((value >> 8) & 0xFF) + "." + std::to_string(value & 0xFF);
}

std::optional<Ipv4Address> Ipv4Address::parse(std::string_view text) {
  std::uint32_t result = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    unsigned octet = 0;
    auto [ptr, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc() || octet > 255) return std::nullopt;
    result = (result << 8) | octet;
    p = ptr;
    if (i < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return Ipv4Address{result};
}

// ---- frames -------------------------------------------------------------

std::string to_string(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::Iec104: return "IEC104";
    case PayloadKind::C2: return "C2";
    case PayloadKind::Other: return "OTHER";
  }
  return "OTHER";
}

std::optional<PayloadKind> payload_kind_from_string(std::string_view text) {
  if (text == "IEC104") return PayloadKind::Iec104;
  if (text == "C2") return PayloadKind::C2;
  if (text == "OTHER") return PayloadKind::Other;
  return std::nullopt;
}

Bytes control_payload(Control c) {
  std::string_view text;
  switch (c) {
    case Control::Open: text = "SYN"; break;
    case Control::Accept: text = "SYN-ACK"; break;
    case Control::Close: text = "FIN"; break;
  }
  return Bytes(text.begin(), text.end());
}

std::optional<Control> parse_control(const Bytes& payload) {
  const std::string_view text(reinterpret_cast<const char*>(payload.data()), payload.size());
  if (text == "SYN") return Control::Open;
  if (text == "SYN-ACK") return Control::Accept;
  if (text == "FIN") return Control::Close;
  return std::nullopt;
}

// ---- inline link ---------------------------------------------------------

void InlineLink::to_switch(Frame frame) {
  frame.timestamp = net_->now();
  net_->enter_switch(std::move(frame));
}

void InlineLink::to_endpoint(Frame frame) {
  auto& port = net_->ports_.at(port_);
  frame.timestamp = net_->now();
  for (const auto& tap : port.agent_taps) tap(frame);
  SimTime when = net_->now() + port.link_latency + net_->jitter();
  when = std::max(when, port.last_to_host);
  port.last_to_host = when;
  const std::size_t index = port_;
  net_->scheduler_->at(when, [net = net_, index, f = std::move(frame)]() mutable {
    net->deliver(index, std::move(f));
  });
}

const EndpointIdentity& InlineLink::endpoint() const { return net_->ports_.at(port_).identity; }

SimTime InlineLink::now() const { return net_->now(); }

// ---- network ------------------------------------------------------------

Network::Network(Scheduler& scheduler, NetworkConfig config)
    : scheduler_(&scheduler), config_(config), rng_(config.seed) {}

PortHandle Network::attach(const EndpointIdentity& identity, Duration link_latency, Host* host,
                           bool registered) {
  for (const auto& p : ports_) {
    const bool clash = p.identity.name == identity.name || p.identity.mac == identity.mac ||
                       p.identity.ip == identity.ip ||
                       (p.agent_identity && (p.agent_identity->mac == identity.mac ||
                                             p.agent_identity->ip == identity.ip));
    if (clash) throw DuplicateIdentity("endpoint identity already attached: " + identity.name);
  }
  Port port;
  port.identity = identity;
  port.link_latency = link_latency;
  port.host = host;
  port.registered = registered;
  ports_.push_back(std::move(port));
  return PortHandle{ports_.size() - 1};
}

void Network::detach(std::string_view name) {
  auto& port = ports_.at(port_index_checked(name));
  port.attached = false;
  port.agent = nullptr;
}

InlineLink Network::insert_inline(std::string_view endpoint_name, const EndpointIdentity& agent_identity,
                                  InlineAgent* agent) {
  const std::size_t index = port_index_checked(endpoint_name);
  auto& port = ports_[index];
  if (port.agent != nullptr) throw AlreadyIntercepted("agent already inline at " + std::string(endpoint_name));
  for (const auto& p : ports_) {
    if (p.identity.mac == agent_identity.mac || p.identity.ip == agent_identity.ip) {
      throw DuplicateIdentity("agent identity clashes with " + p.identity.name);
    }
    if (p.agent_identity && (p.agent_identity->mac == agent_identity.mac ||
                             p.agent_identity->ip == agent_identity.ip) &&
        p.agent_identity->name != agent_identity.name) {
      throw DuplicateIdentity("agent identity clashes with " + p.agent_identity->name);
    }
  }
  port.agent = agent;
  port.agent_identity = agent_identity;
  return InlineLink(*this, index);
}

void Network::remove_inline(std::string_view endpoint_name) {
  auto& port = ports_.at(port_index_checked(endpoint_name));
  port.agent = nullptr;
}

bool Network::intercepted(std::string_view endpoint_name) const {
  const auto index = find(endpoint_name);
  return index && ports_[index->index].agent != nullptr;
}

void Network::add_tap(const TapLocation& location, TapSink sink) {
  if (location.kind == TapLocation::Kind::Switch) {
    switch_taps_.push_back(std::move(sink));
    return;
  }
  const auto index = find(location.endpoint);
  if (!index || ports_[index->index].agent == nullptr) {
    throw UnknownLocation("no intercepted cable at " + location.endpoint);
  }
  ports_[index->index].agent_taps.push_back(std::move(sink));
}

FlowId Network::flow_id_for(const FlowKey& key) {
  auto [it, inserted] = flow_ids_.try_emplace(key, static_cast<FlowId>(flow_ids_.size() + 1));
  if (inserted) flow_stats_.emplace_back();
  return it->second;
}

const FlowStats& Network::flow_stats(FlowId id) const { return flow_stats_.at(id - 1); }

Duration Network::jitter() {
  if (config_.link_jitter.count() <= 0) return Duration{0};
  std::uniform_int_distribution<std::int64_t> dist(0, config_.link_jitter.count());
  return Duration{dist(rng_)};
}

Address Network::address_of(Ipv4Address ip, std::uint16_t port) const {
  Address a;
  a.ip = ip;
  a.port = port;
  for (const auto& p : ports_) {
    if (p.identity.ip == ip) {
      a.mac = p.identity.mac;
      break;
    }
    if (p.agent_identity && p.agent_identity->ip == ip) {
      a.mac = p.agent_identity->mac;
      break;
    }
  }
  return a;
}

Frame Network::make_frame(const Address& src, const Address& dst, PayloadKind kind, Bytes payload) {
  Frame f;
  f.timestamp = now();
  f.src = src;
  f.dst = dst;
  f.kind = kind;
  f.payload = std::move(payload);
  f.flow_id = flow_id_for(f.flow_key());
  return f;
}

void Network::send(PortHandle from, std::uint16_t src_port, Ipv4Address dst_ip, std::uint16_t dst_port,
                   PayloadKind kind, Bytes payload) {
  auto& port = ports_.at(from.index);
  if (!port.attached || payload.empty()) return;
  Address src{port.identity.mac, port.identity.ip, src_port};
  Frame frame = make_frame(src, address_of(dst_ip, dst_port), kind, std::move(payload));
  auto& stats = flow_stats_.at(frame.flow_id - 1);
  ++stats.frames_sent;
  stats.octets_sent += frame.payload.size();

  SimTime when = now() + port.link_latency + jitter();
  when = std::max(when, port.last_to_switch);
  port.last_to_switch = when;
  const std::size_t index = from.index;
  if (port.agent != nullptr) {
    for (const auto& tap : port.agent_taps) tap(frame);
    scheduler_->at(when, [this, index, f = std::move(frame)]() {
      auto& p = ports_[index];
      if (p.agent != nullptr) {
        p.agent->on_from_endpoint(f);
      } else {
        Frame copy = f;
        copy.timestamp = now();
        enter_switch(std::move(copy));
      }
    });
  } else {
    scheduler_->at(when, [this, f = std::move(frame)]() mutable {
      f.timestamp = now();
      enter_switch(std::move(f));
    });
  }
}

void Network::enter_switch(Frame frame) {
  for (const auto& tap : switch_taps_) tap(frame);
  const auto target = route(frame.dst.ip);
  if (!target) return;
  const std::size_t index = *target;
  scheduler_->after(config_.switch_latency, [this, index, f = std::move(frame)]() mutable {
    egress(index, std::move(f));
  });
}

void Network::egress(std::size_t port_index, Frame frame) {
  auto& port = ports_[port_index];
  if (!port.attached) return;
  frame.timestamp = now();
  if (port.agent != nullptr) {
    port.agent->on_from_switch(frame);
    return;
  }
  if (port.agent_identity && frame.dst.ip == port.agent_identity->ip) return;  // agent removed
  SimTime when = now() + port.link_latency + jitter();
  when = std::max(when, port.last_to_host);
  port.last_to_host = when;
  scheduler_->at(when, [this, port_index, f = std::move(frame)]() mutable {
    deliver(port_index, std::move(f));
  });
}

void Network::deliver(std::size_t port_index, Frame frame) {
  auto& port = ports_[port_index];
  if (!port.attached || port.host == nullptr) return;
  frame.timestamp = now();
  if (frame.flow_id >= 1 && frame.flow_id <= flow_stats_.size()) {
    auto& stats = flow_stats_[frame.flow_id - 1];
    ++stats.frames_delivered;
    stats.octets_delivered += frame.payload.size();
  }
  port.host->on_frame(frame);
}

std::optional<std::size_t> Network::route(Ipv4Address ip) const {
  for (std::size_t i = 0; i < ports_.size(); ++i) {
    const auto& p = ports_[i];
    if (!p.attached) continue;
    if (p.identity.ip == ip) return i;
    if (p.agent != nullptr && p.agent_identity && p.agent_identity->ip == ip) return i;
  }
  return std::nullopt;
}

std::size_t Network::port_index_checked(std::string_view name) const {
  const auto index = find(name);
  if (!index) throw UnknownEndpoint("unknown endpoint: " + std::string(name));
  return index->index;
}

const EndpointIdentity& Network::identity(PortHandle port) const { return ports_.at(port.index).identity; }

std::optional<PortHandle> Network::find(std::string_view name) const {
  for (std::size_t i = 0; i < ports_.size(); ++i) {
    if (ports_[i].identity.name == name) return PortHandle{i};
  }
  return std::nullopt;
}

std::vector<EndpointIdentity> Network::registry() const {
  std::vector<EndpointIdentity> out;
  for (const auto& p : ports_) {
    if (p.registered) out.push_back(p.identity);
    if (p.agent_identity) out.push_back(*p.agent_identity);
  }
  return out;
}

std::vector<EndpointIdentity> Network::foreign() const {
  std::vector<EndpointIdentity> out;
  for (const auto& p : ports_) {
    if (!p.registered) out.push_back(p.identity);
  }
  return out;
}

}  // namespace fdilab::net
