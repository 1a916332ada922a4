#include "fdilab/mitm/agent.hpp"

#include <algorithm>

namespace fdilab::mitm {

using iec104::FrameKind;
using nlohmann::json;

std::string to_string(AgentState s) {
  switch (s) {
    case AgentState::Idle: return "Idle";
    case AgentState::Intercepting: return "Intercepting";
    case AgentState::ActionPending: return "ActionPending";
    case AgentState::ActionDone: return "ActionDone";
    case AgentState::ActionFailed: return "ActionFailed";
  }
  return "Idle";
}

Agent::Agent(net::Network& net, AgentConfig cfg, endpoints::EventLog* log)
    : net_(&net), cfg_(std::move(cfg)), log_(log), proxy_(cfg_.proxy), rng_(cfg_.seed) {
  proxy_.set_collect_capacity(cfg_.collect_capacity);
}

Agent::~Agent() {
  for (auto id : timers_) net_->scheduler().cancel(id);
}

void Agent::log(const std::string& kind, const std::string& detail) {
  if (log_ != nullptr) log_->push_back({net::to_seconds(net_->now()), cfg_.name, kind, detail});
}

void Agent::insert() { link_.emplace(net_->insert_inline(cfg_.endpoint, cfg_.identity, this)); }

AgentState Agent::state() const {
  if (!intercepting_) return AgentState::Idle;
  const ActionRecord* last = nullptr;
  for (const auto& [seq, rec] : actions_) {
    if (rec.state == AgentState::ActionPending) return AgentState::ActionPending;
    if (rec.executed_at && (last == nullptr || *rec.executed_at >= *last->executed_at)) last = &rec;
  }
  return last != nullptr ? last->state : AgentState::Intercepting;
}

net::Duration Agent::sample_delay() {
  const auto& d = cfg_.delay;
  std::uniform_real_distribution<double> base(d.min_ms, std::max(d.min_ms, d.max_ms));
  double ms = base(rng_);
  if (d.spike_probability > 0.0) {
    std::bernoulli_distribution spike(std::min(1.0, d.spike_probability));
    if (spike(rng_)) {
      std::uniform_real_distribution<double> extra(d.spike_min_ms, std::max(d.spike_min_ms, d.spike_max_ms));
      ms += extra(rng_);
    }
  }
  return net::millis(ms);
}

// ---- data path --------------------------------------------------------------

void Agent::on_from_switch(const net::Frame& frame) {
  if (frame.dst.ip == cfg_.identity.ip) {
    handle_c2(frame);
    return;
  }
  process(Direction::ToRtu, frame);
}

void Agent::on_from_endpoint(const net::Frame& frame) { process(Direction::ToMtu, frame); }

bool Agent::on_channel(Direction dir, const net::Frame& frame) const {
  if (!channel_) return false;
  const auto& from = dir == Direction::ToRtu ? channel_->mtu : channel_->rtu;
  const auto& to = dir == Direction::ToRtu ? channel_->rtu : channel_->mtu;
  return frame.src.ip == from.ip && frame.src.port == from.port && frame.dst.ip == to.ip && frame.dst.port == to.port;
}

void Agent::emit(Direction dir, net::Frame frame) {
  const auto start = std::max(net_->now(), busy_until_);
  busy_until_ = start + sample_delay();
  auto link = *link_;
  // Captures the link, not the agent, so queued frames survive agent teardown.
  net_->scheduler().at(busy_until_, [link, dir, f = std::move(frame)]() mutable {
    if (dir == Direction::ToRtu) {
      link.to_endpoint(std::move(f));
    } else {
      link.to_switch(std::move(f));
    }
  });
}

void Agent::process(Direction dir, const net::Frame& frame) {
  if (const auto ctl = frame.control()) {
    if (*ctl == net::Control::Open && dir == Direction::ToRtu && frame.dst.port == iec104::kDefaultPort) {
      channel_ = Channel{frame.src, frame.dst};
      channel_open_ = false;
      data_started_ = false;
      proxy_.reset();
      for (auto& r : reassembler_) r.reset();
    } else if (*ctl == net::Control::Accept && on_channel(dir, frame)) {
      channel_open_ = true;
    } else if (*ctl == net::Control::Close && on_channel(dir, frame)) {
      channel_open_ = false;
      data_started_ = false;
      log("channel_closed", dir == Direction::ToRtu ? "by MTU side" : "by RTU side");
      if (intercepting_) send_c2(c2::MessageType::Status, {{"agent", cfg_.name}, {"event", "channel_closed"}});
    }
    net::Frame out = frame;
    if (intercepting_ && on_channel(dir, frame)) out.src.mac = cfg_.identity.mac;
    emit(dir, std::move(out));
    return;
  }
  if (frame.kind != net::PayloadKind::Iec104 || !on_channel(dir, frame)) {
    emit(dir, frame);
    return;
  }
  const double now = net::to_seconds(net_->now());
  auto items = reassembler_[dir == Direction::ToRtu ? 0 : 1].feed(frame.payload);
  if (!intercepting_) {
    for (const auto& item : items) {
      if (item.status != iec104::DecodeStatus::Ok) continue;
      if (dir == Direction::ToMtu && item.apdu.is_u() && item.apdu.apci.u_function == iec104::UFunction::StartDtCon) {
        data_started_ = true;
      }
      (void)proxy_.forward(dir, item.apdu, now);
    }
    emit(dir, frame);
    return;
  }
  for (const auto& item : items) {
    net::Frame out = frame;
    out.src.mac = cfg_.identity.mac;
    if (item.status != iec104::DecodeStatus::Ok) {
      out.payload = item.raw;
      emit(dir, std::move(out));
      continue;
    }
    if (dir == Direction::ToMtu && item.apdu.is_u() && item.apdu.apci.u_function == iec104::UFunction::StartDtCon) {
      data_started_ = true;
    }
    const auto fwd = proxy_.forward(dir, item.apdu, now);
    if (!fwd) continue;
    if (*fwd == item.apdu) {
      out.payload = item.raw;
    } else {
      try {
        out.payload = iec104::encode(*fwd);
      } catch (const iec104::InvariantViolation& e) {
        log("encode_failed", e.what());
        out.payload = item.raw;
      }
    }
    emit(dir, std::move(out));
  }
}

// ---- actions ----------------------------------------------------------------

void Agent::accept_action(std::uint64_t seq, const Action& action) {
  if (actions_.count(seq) != 0) {
    ++duplicates_;
    return;
  }
  ActionRecord rec;
  rec.seq = seq;
  rec.action = action;
  rec.received_at = net::to_seconds(net_->now());
  actions_.emplace(seq, rec);
  if (!intercepting_) {
    intercepting_ = true;
    log("intercepting", "terminating channel at " + cfg_.endpoint);
  }
  const auto when = std::max(net_->now(), net::from_seconds(action.at_time));
  timers_.push_back(net_->scheduler().at(when, [this, seq] { execute(seq); }));
}

void Agent::execute(std::uint64_t seq) {
  auto it = actions_.find(seq);
  if (it == actions_.end() || it->second.executed_at) return;
  auto& rec = it->second;
  rec.executed_at = net::to_seconds(net_->now());
  const Action& a = rec.action;
  switch (a.kind) {
    case ActionKind::Inject: {
      if (!channel_ || !channel_open_ || !data_started_) {
        rec.state = AgentState::ActionFailed;
        rec.reason = "session down";
        break;
      }
      try {
        (void)iec104::encode(iec104::make_i_frame(0, 0, a.forge->asdu()));
      } catch (const iec104::InvariantViolation& e) {
        rec.state = AgentState::ActionFailed;
        rec.reason = std::string("forge rejected: ") + e.what();
        break;
      }
      const auto apdu = proxy_.inject(a.direction, a.forge->asdu());
      iec104::Bytes payload = iec104::encode(apdu);
      const bool to_rtu = a.direction == Direction::ToRtu;
      net::Address src = to_rtu ? channel_->mtu : channel_->rtu;
      src.mac = cfg_.identity.mac;
      const net::Address dst = to_rtu ? channel_->rtu : channel_->mtu;
      emit(a.direction, net_->make_frame(src, dst, net::PayloadKind::Iec104, std::move(payload)));
      rec.state = AgentState::ActionDone;
      log("inject", iec104::describe(apdu));
      break;
    }
    case ActionKind::Modify:
    case ActionKind::Drop:
    case ActionKind::Collect:
      proxy_.add_rule(a);
      rec.state = AgentState::ActionDone;
      break;
    case ActionKind::Passthrough:
      proxy_.clear_rules();
      rec.state = AgentState::ActionDone;
      break;
  }
  if (rec.state == AgentState::ActionFailed) log("action_failed", rec.reason);
  report(rec);
}

// ---- C2 ----------------------------------------------------------------------

void Agent::handle_c2(const net::Frame& frame) {
  if (frame.dst.port != cfg_.c2_port) return;
  if (const auto ctl = frame.control()) {
    if (*ctl == net::Control::Open) {
      coordinator_ = frame.src;
      c2_in_.reset();
      link_->to_switch(net_->make_frame({cfg_.identity.mac, cfg_.identity.ip, cfg_.c2_port}, frame.src,
                                        net::PayloadKind::Other, net::control_payload(net::Control::Accept)));
    } else if (*ctl == net::Control::Close) {
      coordinator_.reset();
    }
    return;
  }
  if (frame.kind != net::PayloadKind::C2 || !coordinator_ || frame.src.ip != coordinator_->ip) return;
  for (const auto& m : c2_in_.feed(frame.payload)) on_message(m);
}

void Agent::send_c2(c2::MessageType type, json body) {
  if (!coordinator_ || !link_) return;
  c2::Message m;
  m.seq = ++c2_seq_;
  m.type = type;
  m.body = std::move(body);
  link_->to_switch(net_->make_frame({cfg_.identity.mac, cfg_.identity.ip, cfg_.c2_port}, *coordinator_,
                                    net::PayloadKind::C2, c2::encode(m)));
}

void Agent::report(const ActionRecord& rec) {
  json body = {{"agent", cfg_.name},
               {"action", rec.seq},
               {"state", to_string(rec.state)},
               {"t", rec.executed_at.value_or(net::to_seconds(net_->now()))}};
  if (!rec.reason.empty()) body["reason"] = rec.reason;
  send_c2(c2::MessageType::Status, std::move(body));
}

json Agent::status_body() const {
  const auto& c = proxy_.counts();
  json actions = json::object();
  for (const auto& [seq, rec] : actions_) actions[std::to_string(seq)] = to_string(rec.state);
  return {{"agent", cfg_.name},
          {"state", to_string(state())},
          {"channel_open", channel_open_},
          {"actions", actions},
          {"collected", proxy_.collected().size()},
          {"counts",
           {{"inj_to_rtu", c.inj_to_rtu}, {"inj_to_mtu", c.inj_to_mtu}, {"drop_to_rtu", c.drop_to_rtu},
            {"drop_to_mtu", c.drop_to_mtu}}}};
}

void Agent::on_message(const c2::Message& m) {
  switch (m.type) {
    case c2::MessageType::Action: {
      const bool duplicate = actions_.count(m.seq) != 0;
      if (duplicate) {
        ++duplicates_;
      } else {
        try {
          accept_action(m.seq, action_from_json(m.body.value("action", json::object())));
        } catch (const InvalidAction& e) {
          ActionRecord rec;
          rec.seq = m.seq;
          rec.received_at = net::to_seconds(net_->now());
          rec.executed_at = rec.received_at;
          rec.state = AgentState::ActionFailed;
          rec.reason = e.what();
          actions_.emplace(m.seq, rec);
          send_c2(c2::MessageType::Ack, {{"ack", m.seq}});
          report(rec);
          return;
        }
      }
      send_c2(c2::MessageType::Ack, {{"ack", m.seq}});
      break;
    }
    case c2::MessageType::Heartbeat: {
      json body = status_body();
      body["heartbeat"] = m.seq;
      send_c2(c2::MessageType::Status, std::move(body));
      break;
    }
    case c2::MessageType::Ack:
    case c2::MessageType::Status: break;
  }
}

}  // namespace fdilab::mitm
