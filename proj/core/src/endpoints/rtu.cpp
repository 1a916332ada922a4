#include "fdilab/endpoints/rtu.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdilab::endpoints {

using iec104::Asdu;
using iec104::Cot;
using iec104::TypeId;
using iec104::UFunction;

void RtuConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("rtu name must not be empty");
  if (common_address == 0 || common_address == 0xFFFF) throw std::invalid_argument(name + ": common address out of range");
  if (!(measurement_period > 0.0)) throw std::invalid_argument(name + ": measurement period must be > 0");
  if (sequence.w < 1 || sequence.w > sequence.k) throw std::invalid_argument(name + ": requires 1 <= w <= k");
}

RtuConfig rtu_config_from_grid(const grid::GridSpec& grid, const std::string& rtu_name, std::uint16_t ca) {
  RtuConfig cfg;
  cfg.name = rtu_name;
  cfg.common_address = ca;
  for (const auto& a : grid.assets) {
    if (a.rtu == rtu_name) cfg.assets.push_back(a);
  }
  for (const auto& mp : grid.measuring_points) {
    if (std::find(mp.reported_by.begin(), mp.reported_by.end(), rtu_name) != mp.reported_by.end()) {
      cfg.measuring_points.push_back(mp);
    }
  }
  return cfg;
}

Rtu::Rtu(net::Network& net, RtuConfig cfg, ProcessInterface& process, EventLog* log)
    : net_(&net), cfg_(std::move(cfg)), process_(&process), log_(log) {
  cfg_.validate();
}

Rtu::~Rtu() { net_->scheduler().cancel(timer_); }

void Rtu::log(const std::string& kind, const std::string& detail) {
  if (log_ != nullptr) log_->push_back({net::to_seconds(net_->now()), cfg_.name, kind, detail});
}

void Rtu::start(const net::EndpointIdentity& identity, net::Duration link_latency) {
  port_ = net_->attach(identity, link_latency, this);
  const auto first = net::from_seconds(cfg_.measurement_offset);
  timer_ = net_->scheduler().at(std::max(first, net_->now()), [this] { report_periodic(); });
}

void Rtu::report_periodic() {
  if (started_ && session_ && session_->is_open()) session_->send_asdu(snapshot(Cot::Periodic));
  ++period_index_;
  const auto next = net::from_seconds(cfg_.measurement_offset + static_cast<double>(period_index_) * cfg_.measurement_period);
  timer_ = net_->scheduler().at(next, [this] { report_periodic(); });
}

Asdu Rtu::snapshot(Cot cot) const {
  Asdu asdu;
  asdu.type_id = TypeId::M_ME_NC_1;
  asdu.cot = cot;
  asdu.common_address = cfg_.common_address;
  for (const auto& a : cfg_.assets) {
    iec104::InformationObject io;
    io.ioa = a.ioa_power;
    io.value = static_cast<float>(process_->active_power(a.name));
    asdu.objects.push_back(io);
  }
  for (const auto& mp : cfg_.measuring_points) {
    iec104::InformationObject io;
    io.ioa = mp.ioa_voltage;
    io.value = static_cast<float>(process_->voltage(mp.name));
    asdu.objects.push_back(io);
  }
  return asdu;
}

void Rtu::on_frame(const net::Frame& frame) {
  if (const auto ctl = frame.control()) {
    if (frame.dst.port != iec104::kDefaultPort) return;
    if (*ctl == net::Control::Open) {
      // A new connection replaces any previous one.
      if (session_ && session_->is_open()) session_->closed_by_peer();
      started_ = false;
      ++accepted_;
      Session::Callbacks cb;
      cb.on_asdu = [this](const Asdu& a) { on_asdu(a); };
      cb.on_u_frame = [this](UFunction fn) { on_u_frame(fn); };
      cb.on_closed = [this](const std::string& reason) {
        started_ = false;
        if (reason != "closed by peer") ++aborts_;
      };
      session_ = std::make_unique<Session>(*net_, port_, iec104::kDefaultPort, frame.src.ip, frame.src.port,
                                           cfg_.sequence, cfg_.name, log_, std::move(cb));
      log("connect", "accepted " + frame.src.ip.str() + ":" + std::to_string(frame.src.port));
      net_->send(port_, iec104::kDefaultPort, frame.src.ip, frame.src.port, net::PayloadKind::Other,
                 net::control_payload(net::Control::Accept));
    } else if (*ctl == net::Control::Close) {
      if (session_ && session_->remote_ip() == frame.src.ip && session_->remote_port() == frame.src.port) {
        session_->closed_by_peer();
      }
    }
    return;
  }
  if (frame.kind != net::PayloadKind::Iec104 || !session_) return;
  if (session_->remote_ip() != frame.src.ip || session_->remote_port() != frame.src.port) return;
  session_->receive(frame);
}

void Rtu::on_u_frame(UFunction fn) {
  switch (fn) {
    case UFunction::StartDtAct:
      session_->send_u(UFunction::StartDtCon);
      started_ = true;
      break;
    case UFunction::StopDtAct:
      session_->send_u(UFunction::StopDtCon);
      started_ = false;
      break;
    default: break;
  }
}

void Rtu::reply(Asdu asdu, Cot cot, bool negative) {
  asdu.cot = cot;
  asdu.negative_confirm = negative;
  session_->send_asdu(std::move(asdu));
}

void Rtu::on_asdu(const Asdu& asdu) {
  if (!started_) {
    log("ignored", "ASDU before STARTDT");
    return;
  }
  if (asdu.type_id == TypeId::C_SE_NC_1) {
    if (asdu.cot != Cot::Activation) {
      reply(asdu, Cot::ActivationCon, true);
      return;
    }
    if (asdu.common_address != cfg_.common_address) {
      log("reject", "unknown common address " + std::to_string(asdu.common_address));
      reply(asdu, Cot::ActivationCon, true);
      return;
    }
    const grid::AssetSpec* target = nullptr;
    const auto& io = asdu.objects.front();
    for (const auto& a : cfg_.assets) {
      if (a.controllable && a.ioa_setpoint == io.ioa) target = &a;
    }
    if (target == nullptr || asdu.objects.size() != 1 || !std::isfinite(io.value)) {
      log("reject", "no controllable object at IOA " + std::to_string(io.ioa));
      reply(asdu, Cot::ActivationCon, true);
      return;
    }
    reply(asdu, Cot::ActivationCon);
    process_->apply_setpoint(target->name, static_cast<double>(io.value));
    log("setpoint", target->name + "=" + grid::format_number(static_cast<double>(io.value)));
    reply(asdu, Cot::ActivationTerm);
    return;
  }
  if (asdu.type_id == TypeId::C_IC_NA_1) {
    const bool ok = asdu.cot == Cot::Activation && asdu.common_address == cfg_.common_address;
    reply(asdu, Cot::ActivationCon, !ok);
    if (!ok) return;
    session_->send_asdu(snapshot(Cot::Interrogated));
    reply(asdu, Cot::ActivationTerm);
    return;
  }
  log("ignored", "unsupported ASDU " + iec104::to_string(asdu.type_id));
}

}  // namespace fdilab::endpoints
