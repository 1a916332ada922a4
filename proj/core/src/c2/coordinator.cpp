#include "fdilab/c2/coordinator.hpp"

#include <algorithm>
#include <stdexcept>

namespace fdilab::c2 {

using nlohmann::json;

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Pending: return "ActionPending";
    case Outcome::Done: return "ActionDone";
    case Outcome::Failed: return "ActionFailed";
  }
  return "ActionPending";
}

void CoordinatorConfig::validate() const {
  for (const auto& item : plan) {
    const bool known = std::any_of(agents.begin(), agents.end(), [&](const AgentEndpoint& a) { return a.name == item.agent; });
    if (!known) throw std::invalid_argument("plan references unknown agent " + item.agent);
    item.action.validate();
  }
  if (!(heartbeat_period > 0.0) || !(heartbeat_timeout > 0.0)) throw std::invalid_argument("heartbeat period and timeout must be > 0");
  if (!(retransmit_timeout > 0.0)) throw std::invalid_argument("retransmit timeout must be > 0");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (lead_time < 0.0) throw std::invalid_argument("lead_time must be >= 0");
}

Coordinator::Coordinator(net::Network& net, CoordinatorConfig cfg, endpoints::EventLog* log)
    : net_(&net), cfg_(std::move(cfg)), log_(log) {
  cfg_.validate();
  for (const auto& item : cfg_.plan) {
    ActionOutcome o;
    o.agent = item.agent;
    o.action = item.action;
    o.action.at_time = item.t;
    outcomes_.push_back(o);
  }
}

Coordinator::~Coordinator() {
  auto& sched = net_->scheduler();
  for (auto id : timers_) sched.cancel(id);
  for (auto& s : sessions_) sched.cancel(s->timer);
}

void Coordinator::log(const std::string& kind, const std::string& detail) {
  if (log_ != nullptr) log_->push_back({net::to_seconds(net_->now()), cfg_.name, kind, detail});
}

void Coordinator::start(const net::EndpointIdentity& identity, net::Duration link_latency) {
  identity_ = identity;
  port_ = net_->attach(identity, link_latency, this, false);
  auto& sched = net_->scheduler();
  std::uint16_t local = cfg_.local_port_base;
  for (const auto& a : cfg_.agents) {
    auto s = std::make_unique<AgentSession>();
    s->endpoint = a;
    s->local_port = local++;
    AgentSession* raw = s.get();
    sessions_.push_back(std::move(s));
    raw->timer = sched.at(std::max(net_->now(), net::from_seconds(cfg_.start_time)), [this, raw] {
      raw->timer = 0;
      connect(*raw);
    });
  }
  for (std::size_t i = 0; i < outcomes_.size(); ++i) {
    const double when = std::max(cfg_.start_time, outcomes_[i].action.at_time - cfg_.lead_time);
    timers_.push_back(sched.at(std::max(net_->now(), net::from_seconds(when)), [this, i] { ship(i); }));
  }
}

Coordinator::AgentSession* Coordinator::session_for(const std::string& agent) {
  for (auto& s : sessions_) {
    if (s->endpoint.name == agent) return s.get();
  }
  return nullptr;
}

void Coordinator::connect(AgentSession& s) {
  s.state = SessionState::Connecting;
  ++s.connect_attempts;
  net_->send(port_, s.local_port, s.endpoint.ip, s.endpoint.port, net::PayloadKind::Other,
             net::control_payload(net::Control::Open));
  s.timer = net_->scheduler().after(net::from_seconds(cfg_.connect_timeout), [this, &s] { on_connect_timeout(s); });
}

void Coordinator::on_connect_timeout(AgentSession& s) {
  s.timer = 0;
  if (s.state != SessionState::Connecting) return;
  if (s.connect_attempts > cfg_.max_retries) {
    mark_unreachable(s, "unreachable: no answer to connect");
    return;
  }
  connect(s);
}

void Coordinator::on_open(AgentSession& s) {
  if (s.state != SessionState::Connecting) return;
  net_->scheduler().cancel(s.timer);
  s.state = SessionState::Open;
  s.last_rx = net::to_seconds(net_->now());
  log("c2_open", s.endpoint.name);
  const double now = net::to_seconds(net_->now());
  for (std::size_t i = 0; i < outcomes_.size(); ++i) {
    auto& o = outcomes_[i];
    const double when = std::max(cfg_.start_time, o.action.at_time - cfg_.lead_time);
    if (o.agent == s.endpoint.name && o.seq == 0 && o.outcome == Outcome::Pending && when <= now) ship(i);
  }
  s.timer = net_->scheduler().after(net::from_seconds(cfg_.heartbeat_period), [this, &s] { heartbeat(s); });
}

void Coordinator::heartbeat(AgentSession& s) {
  s.timer = 0;
  if (s.state != SessionState::Open) return;
  const double now = net::to_seconds(net_->now());
  if (now - s.last_rx > cfg_.heartbeat_timeout) {
    mark_unreachable(s, "unreachable: heartbeat timeout");
    return;
  }
  Message m;
  m.seq = ++s.next_seq;
  m.type = MessageType::Heartbeat;
  m.body = {{"t", now}};
  ++s.heartbeats_sent;
  send(s, m);
  s.timer = net_->scheduler().after(net::from_seconds(cfg_.heartbeat_period), [this, &s] { heartbeat(s); });
}

void Coordinator::mark_unreachable(AgentSession& s, const std::string& reason) {
  s.state = SessionState::Unreachable;
  net_->scheduler().cancel(s.timer);
  s.timer = 0;
  log("c2_lost", s.endpoint.name + ": " + reason);
  const double now = net::to_seconds(net_->now());
  for (auto& o : outcomes_) {
    if (o.agent == s.endpoint.name && o.outcome == Outcome::Pending) {
      o.outcome = Outcome::Failed;
      o.reason = reason;
      o.completed_at = now;
    }
  }
}

void Coordinator::ship(std::size_t index) {
  auto& o = outcomes_[index];
  if (o.seq != 0 || o.outcome != Outcome::Pending) return;
  AgentSession* s = session_for(o.agent);
  if (s == nullptr) return;
  if (s->state == SessionState::Unreachable) {
    o.outcome = Outcome::Failed;
    o.reason = "unreachable";
    o.completed_at = net::to_seconds(net_->now());
    return;
  }
  if (s->state != SessionState::Open) return;  // shipped from on_open
  o.seq = ++s->next_seq;
  transmit(index);
}

void Coordinator::transmit(std::size_t index) {
  auto& o = outcomes_[index];
  AgentSession* s = session_for(o.agent);
  Message m;
  m.seq = o.seq;
  m.type = MessageType::Action;
  m.body = {{"agent", o.agent}, {"action", mitm::to_json(o.action)}};
  const double now = net::to_seconds(net_->now());
  if (!o.sent_at) o.sent_at = now;
  ++o.transmissions;
  send(*s, m);
  timers_.push_back(
      net_->scheduler().after(net::from_seconds(cfg_.retransmit_timeout), [this, index] { on_retransmit_timer(index); }));
}

void Coordinator::on_retransmit_timer(std::size_t index) {
  auto& o = outcomes_[index];
  if (o.acked_at || o.outcome != Outcome::Pending) return;
  AgentSession* s = session_for(o.agent);
  if (s == nullptr || s->state != SessionState::Open) return;
  if (o.transmissions > cfg_.max_retries) {
    o.outcome = Outcome::Failed;
    o.reason = "unreachable: no ack";
    o.completed_at = net::to_seconds(net_->now());
    log("action_failed", o.agent + " seq=" + std::to_string(o.seq) + " " + o.reason);
    return;
  }
  log("retransmit", o.agent + " seq=" + std::to_string(o.seq));
  transmit(index);
}

void Coordinator::send(AgentSession& s, const Message& m) {
  ++messages_sent_;
  net_->send(port_, s.local_port, s.endpoint.ip, s.endpoint.port, net::PayloadKind::C2, encode(m));
}

void Coordinator::on_frame(const net::Frame& frame) {
  AgentSession* s = nullptr;
  for (auto& candidate : sessions_) {
    if (candidate->endpoint.ip == frame.src.ip && candidate->endpoint.port == frame.src.port &&
        candidate->local_port == frame.dst.port) {
      s = candidate.get();
    }
  }
  if (s == nullptr) return;
  if (const auto ctl = frame.control()) {
    if (*ctl == net::Control::Accept) on_open(*s);
    if (*ctl == net::Control::Close && s->state == SessionState::Open) mark_unreachable(*s, "closed by agent");
    return;
  }
  if (frame.kind != net::PayloadKind::C2 || s->state != SessionState::Open) return;
  for (const auto& m : s->inbound.feed(frame.payload)) on_message(*s, m);
}

void Coordinator::on_message(AgentSession& s, const Message& m) {
  ++messages_received_;
  const double now = net::to_seconds(net_->now());
  s.last_rx = now;
  auto find = [&](std::uint64_t seq) -> ActionOutcome* {
    for (auto& o : outcomes_) {
      if (o.agent == s.endpoint.name && o.seq == seq && seq != 0) return &o;
    }
    return nullptr;
  };
  if (m.type == MessageType::Ack) {
    ActionOutcome* o = m.body.contains("ack") && m.body["ack"].is_number_unsigned() ? find(m.body["ack"].get<std::uint64_t>()) : nullptr;
    if (o == nullptr) return;
    if (o->acked_at) {
      ++duplicate_acks_;
      return;
    }
    o->acked_at = now;
    return;
  }
  if (m.type != MessageType::Status) return;
  ++s.statuses_received;
  if (m.body.contains("heartbeat")) {
    s.last_heartbeat = now;
    s.agent_state = m.body.value("state", s.agent_state);
  }
  if (m.body.contains("action") && m.body["action"].is_number_unsigned()) {
    ActionOutcome* o = find(m.body["action"].get<std::uint64_t>());
    if (o == nullptr || o->outcome != Outcome::Pending) return;
    const auto state = m.body.value("state", std::string());
    if (state == "ActionDone") {
      o->outcome = Outcome::Done;
    } else if (state == "ActionFailed") {
      o->outcome = Outcome::Failed;
      o->reason = m.body.value("reason", std::string("agent reported failure"));
    } else {
      return;
    }
    o->completed_at = m.body.value("t", now);
    s.agent_state = state;
  }
}

void Coordinator::finish() {
  const double now = net::to_seconds(net_->now());
  for (auto& o : outcomes_) {
    if (o.outcome == Outcome::Pending) {
      o.outcome = Outcome::Failed;
      o.reason = o.seq == 0 ? "never shipped" : "no completion before end of run";
      o.completed_at = now;
    }
  }
}

json Coordinator::report() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  nlohmann::ordered_json r;
  r["coordinator"] = {{"name", cfg_.name}, {"ip", identity_.ip.str()}};
  auto agents = nlohmann::ordered_json::array();
  for (const auto& s : sessions_) {
    nlohmann::ordered_json a;
    a["name"] = s->endpoint.name;
    a["ip"] = s->endpoint.ip.str();
    a["port"] = s->endpoint.port;
    a["reachable"] = s->state != SessionState::Unreachable;
    a["connected"] = s->state == SessionState::Open;
    a["state"] = s->agent_state;
    a["last_heartbeat"] = opt(s->last_heartbeat);
    a["heartbeats_sent"] = s->heartbeats_sent;
    a["statuses_received"] = s->statuses_received;
    agents.push_back(a);
  }
  r["agents"] = agents;
  auto actions = nlohmann::ordered_json::array();
  for (const auto& o : outcomes_) {
    nlohmann::ordered_json a;
    a["seq"] = o.seq;
    a["agent"] = o.agent;
    a["kind"] = mitm::to_string(o.action.kind);
    a["direction"] = mitm::to_string(o.action.direction);
    a["at_time"] = o.action.at_time;
    a["sent_at"] = opt(o.sent_at);
    a["acked_at"] = opt(o.acked_at);
    a["completed_at"] = opt(o.completed_at);
    a["transmissions"] = o.transmissions;
    a["outcome"] = to_string(o.outcome);
    if (!o.reason.empty()) a["reason"] = o.reason;
    actions.push_back(a);
  }
  r["actions"] = actions;
  r["messages_sent"] = messages_sent_;
  r["messages_received"] = messages_received_;
  r["duplicate_acks"] = duplicate_acks_;
  return r;
}

}  // namespace fdilab::c2
