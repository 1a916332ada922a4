#include "fdilab/endpoints/mtu.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fdilab::endpoints {

using iec104::Asdu;
using iec104::Cot;
using iec104::TypeId;
using iec104::UFunction;

std::string to_string(TransactionState s) {
  switch (s) {
    case TransactionState::Sent: return "Sent";
    case TransactionState::Confirmed: return "Confirmed";
    case TransactionState::Terminated: return "Terminated";
    case TransactionState::Failed: return "Failed";
  }
  return "Failed";
}

void MtuConfig::validate() const {
  if (sequence.w < 1 || sequence.w > sequence.k) throw std::invalid_argument("mtu: requires 1 <= w <= k");
  if (!(transaction_timeout > 0.0)) throw std::invalid_argument("mtu: transaction timeout must be > 0");
  if (interrogation_period < 0.0) throw std::invalid_argument("mtu: interrogation period must be >= 0");
  double last = -1e300;
  for (const auto& c : schedule) {
    if (c.t < last) throw std::invalid_argument("mtu: schedule times must be non-decreasing");
    last = c.t;
    const bool known = std::any_of(rtus.begin(), rtus.end(), [&](const MtuRtuLink& r) { return r.name == c.rtu; });
    if (!known) throw std::invalid_argument("mtu: schedule references unknown rtu " + c.rtu);
  }
}

Mtu::Mtu(net::Network& net, MtuConfig cfg, EventLog* log) : net_(&net), cfg_(std::move(cfg)), log_(log) {
  cfg_.validate();
  next_port_ = cfg_.ephemeral_base;
}

Mtu::~Mtu() {
  auto& sched = net_->scheduler();
  for (auto id : timers_) sched.cancel(id);
  sched.cancel(gi_timer_);
  for (auto& l : links_) sched.cancel(l->timer);
}

void Mtu::log(const std::string& kind, const std::string& detail) {
  if (log_ != nullptr) log_->push_back({net::to_seconds(net_->now()), cfg_.name, kind, detail});
}

void Mtu::start(const net::EndpointIdentity& identity, net::Duration link_latency) {
  port_ = net_->attach(identity, link_latency, this);
  for (const auto& r : cfg_.rtus) {
    auto link = std::make_unique<Link>();
    link->cfg = r;
    link->backoff = cfg_.reconnect_backoff;
    links_.push_back(std::move(link));
  }
  for (auto& l : links_) connect(*l);
  auto& sched = net_->scheduler();
  for (const auto& cmd : cfg_.schedule) {
    timers_.push_back(sched.at(net::from_seconds(cmd.t), [this, cmd] { fire(cmd); }));
  }
  if (cfg_.interrogation_period > 0.0) {
    gi_timer_ = sched.after(net::from_seconds(cfg_.interrogation_period), [this] { interrogate(); });
  }
}

Mtu::Link* Mtu::link_by_name(const std::string& name) {
  for (auto& l : links_) {
    if (l->cfg.name == name) return l.get();
  }
  return nullptr;
}

bool Mtu::connected(const std::string& rtu) const {
  for (const auto& l : links_) {
    if (l->cfg.name == rtu) return l->state == LinkState::Open && l->started;
  }
  return false;
}

const Session* Mtu::session(const std::string& rtu) const {
  for (const auto& l : links_) {
    if (l->cfg.name == rtu) return l->session.get();
  }
  return nullptr;
}

std::uint64_t Mtu::connects(const std::string& rtu) const {
  for (const auto& l : links_) {
    if (l->cfg.name == rtu) return l->connects;
  }
  return 0;
}

void Mtu::connect(Link& link) {
  link.retired.clear();
  link.state = LinkState::Connecting;
  link.started = false;
  link.local_port = next_port_;
  next_port_ = next_port_ == 0xFFFF ? cfg_.ephemeral_base : static_cast<std::uint16_t>(next_port_ + 1);
  log("connect", "dialing " + link.cfg.name + " from port " + std::to_string(link.local_port));
  net_->send(port_, link.local_port, link.cfg.ip, link.cfg.port, net::PayloadKind::Other,
             net::control_payload(net::Control::Open));
  link.timer = net_->scheduler().after(net::from_seconds(cfg_.connect_timeout), [this, &link] { on_connect_timeout(link); });
}

void Mtu::on_connect_timeout(Link& link) {
  link.timer = 0;
  if (link.state != LinkState::Connecting) return;
  log("connect_failed", link.cfg.name + " did not answer");
  schedule_reconnect(link);
}

void Mtu::schedule_reconnect(Link& link) {
  link.state = LinkState::Down;
  link.started = false;
  net_->scheduler().cancel(link.timer);
  const double delay = link.backoff;
  link.backoff = std::min(link.backoff * 2.0, cfg_.reconnect_backoff_max);
  link.timer = net_->scheduler().after(net::from_seconds(delay), [this, &link] {
    link.timer = 0;
    connect(link);
  });
}

void Mtu::on_accept(Link& link) {
  if (link.state != LinkState::Connecting) return;
  net_->scheduler().cancel(link.timer);
  link.timer = 0;
  link.state = LinkState::Open;
  link.backoff = cfg_.reconnect_backoff;
  ++link.connects;
  Session::Callbacks cb;
  cb.on_asdu = [this, &link](const Asdu& a) { on_asdu(link, a); };
  cb.on_u_frame = [this, &link](UFunction fn) {
    if (fn == UFunction::StartDtCon && !link.started) {
      link.started = true;
      send_interrogation(link);
    }
  };
  cb.on_closed = [this, &link](const std::string& reason) { on_closed(link, reason); };
  if (link.session) link.retired.push_back(std::move(link.session));
  link.session = std::make_unique<Session>(*net_, port_, link.local_port, link.cfg.ip, link.cfg.port, cfg_.sequence,
                                           cfg_.name, log_, std::move(cb));
  link.session->send_u(UFunction::StartDtAct);
}

void Mtu::on_closed(Link& link, const std::string& reason) {
  log("link_down", link.cfg.name + ": " + reason);
  // Pending transactions on this link cannot complete.
  for (auto* list : {&transactions_, &interrogations_}) {
    for (auto& t : *list) {
      if (t.rtu == link.cfg.name && (t.state == TransactionState::Sent || t.state == TransactionState::Confirmed)) {
        t.state = TransactionState::Failed;
        t.t_failed = net::to_seconds(net_->now());
        t.reason = "connection lost";
      }
    }
  }
  schedule_reconnect(link);
}

void Mtu::on_frame(const net::Frame& frame) {
  Link* link = nullptr;
  for (auto& l : links_) {
    if (l->cfg.ip == frame.src.ip && l->cfg.port == frame.src.port && l->local_port == frame.dst.port) link = l.get();
  }
  if (link == nullptr) return;
  if (const auto ctl = frame.control()) {
    if (*ctl == net::Control::Accept) {
      on_accept(*link);
    } else if (*ctl == net::Control::Close && link->session && link->session->is_open()) {
      link->session->closed_by_peer();
    }
    return;
  }
  if (frame.kind == net::PayloadKind::Iec104 && link->session) link->session->receive(frame);
}

void Mtu::on_asdu(Link& link, const Asdu& asdu) {
  const double now = net::to_seconds(net_->now());
  if (asdu.type_id == TypeId::M_ME_NC_1 || asdu.type_id == TypeId::M_SP_NA_1) {
    for (const auto& io : asdu.objects) {
      measurements_.push_back({now, link.cfg.name, asdu.common_address, io.ioa, asdu.cot, io.value});
    }
    return;
  }
  if (asdu.cot != Cot::ActivationCon && asdu.cot != Cot::ActivationTerm) return;
  const std::uint32_t ioa = asdu.objects.empty() ? 0 : asdu.objects.front().ioa;
  if (match_reply(asdu.type_id == TypeId::C_IC_NA_1 ? interrogations_ : transactions_, link, asdu, ioa)) return;
  // A reply we never asked for: record and keep going.
  OrphanEvent o;
  o.t = now;
  o.rtu = link.cfg.name;
  o.common_address = asdu.common_address;
  o.type_id = asdu.type_id;
  o.ioa = ioa;
  o.cot = asdu.cot;
  o.value = asdu.objects.empty() ? 0.0 : static_cast<double>(asdu.objects.front().value);
  orphans_.push_back(o);
  log("orphan", link.cfg.name + " " + iec104::to_string(asdu.type_id) + " ioa=" + std::to_string(ioa) +
                    " cot=" + std::to_string(static_cast<int>(asdu.cot)));
}

void Mtu::send_interrogation(Link& link) {
  Asdu gi;
  gi.type_id = TypeId::C_IC_NA_1;
  gi.cot = Cot::Activation;
  gi.common_address = link.cfg.common_address;
  gi.objects.push_back({0, 0.0F, 0, iec104::kQoiStation, false});
  CommandTransaction t;
  t.type_id = TypeId::C_IC_NA_1;
  t.rtu = link.cfg.name;
  t.common_address = link.cfg.common_address;
  t.t_sent = net::to_seconds(net_->now());
  interrogations_.push_back(t);
  link.session->send_asdu(std::move(gi));
}

bool Mtu::match_reply(std::vector<CommandTransaction>& list, const Link& link, const Asdu& asdu, std::uint32_t ioa) {
  const double now = net::to_seconds(net_->now());
  const TransactionState wanted = asdu.cot == Cot::ActivationCon ? TransactionState::Sent : TransactionState::Confirmed;
  for (auto& t : list) {
    if (t.rtu != link.cfg.name || t.type_id != asdu.type_id || t.common_address != asdu.common_address ||
        t.ioa != ioa || t.state != wanted) {
      continue;
    }
    if (asdu.cot == Cot::ActivationCon) {
      t.t_con = now;
      if (asdu.negative_confirm) {
        t.state = TransactionState::Failed;
        t.t_failed = now;
        t.reason = "negative confirmation";
      } else {
        t.state = TransactionState::Confirmed;
      }
    } else {
      t.t_term = now;
      t.state = TransactionState::Terminated;
    }
    return true;
  }
  return false;
}

void Mtu::interrogate() {
  for (auto& l : links_) {
    if (l->state == LinkState::Open && l->started && l->session && l->session->is_open()) send_interrogation(*l);
  }
  gi_timer_ = net_->scheduler().after(net::from_seconds(cfg_.interrogation_period), [this] { interrogate(); });
}

void Mtu::send_setpoint(const std::string& rtu, std::uint32_t ioa, double value) { fire({net::to_seconds(net_->now()), rtu, ioa, value}); }

void Mtu::fire(const ScheduledCommand& cmd) {
  Link* link = link_by_name(cmd.rtu);
  if (link == nullptr) return;
  CommandTransaction t;
  t.rtu = cmd.rtu;
  t.common_address = link->cfg.common_address;
  t.ioa = cmd.ioa;
  t.value = cmd.value;
  t.t_sent = net::to_seconds(net_->now());
  if (!(link->state == LinkState::Open && link->started && link->session && link->session->is_open())) {
    t.state = TransactionState::Failed;
    t.t_failed = t.t_sent;
    t.reason = "not connected";
    transactions_.push_back(t);
    log("command_failed", cmd.rtu + " not connected");
    return;
  }
  Asdu asdu;
  asdu.type_id = TypeId::C_SE_NC_1;
  asdu.cot = Cot::Activation;
  asdu.common_address = link->cfg.common_address;
  asdu.objects.push_back({cmd.ioa, static_cast<float>(cmd.value), 0, 0, false});
  transactions_.push_back(t);
  const std::size_t index = transactions_.size() - 1;
  link->session->send_asdu(std::move(asdu));
  timers_.push_back(net_->scheduler().after(net::from_seconds(cfg_.transaction_timeout), [this, index] { expire(index); }));
}

void Mtu::expire(std::size_t index) {
  auto& t = transactions_.at(index);
  if (t.state == TransactionState::Sent || t.state == TransactionState::Confirmed) {
    t.state = TransactionState::Failed;
    t.t_failed = net::to_seconds(net_->now());
    t.reason = "timeout";
    log("command_failed", t.rtu + " ioa=" + std::to_string(t.ioa) + " timed out");
  }
}

void Mtu::write_transactions(std::ostream& out) const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const auto& t : transactions_) {
    nlohmann::ordered_json j;
    j["t_sent"] = t.t_sent;
    j["t_con"] = opt(t.t_con);
    j["t_term"] = opt(t.t_term);
    j["rtu"] = t.rtu;
    j["ioa"] = t.ioa;
    j["value"] = t.value;
    j["state"] = to_string(t.state);
    if (!t.reason.empty()) j["reason"] = t.reason;
    out << j.dump() << '\n';
  }
}

}  // namespace fdilab::endpoints
