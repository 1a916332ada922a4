#include "fdilab/endpoints/session.hpp"

namespace fdilab::endpoints {
namespace {
constexpr net::Duration kHousekeepingPeriod = net::from_seconds(0.5);
}

using iec104::Apdu;
using iec104::FrameKind;
using iec104::UFunction;

Session::Session(net::Network& net, net::PortHandle port, std::uint16_t local_port, net::Ipv4Address remote_ip,
                 std::uint16_t remote_port, const SequenceParams& params, std::string owner, EventLog* log,
                 Callbacks callbacks)
    : net_(&net),
      port_(port),
      local_port_(local_port),
      remote_ip_(remote_ip),
      remote_port_(remote_port),
      seq_(params),
      owner_(std::move(owner)),
      log_(log),
      callbacks_(std::move(callbacks)),
      last_rx_at_(net.now()) {
  timer_ = net_->scheduler().after(kHousekeepingPeriod, [this] { housekeeping(); });
}

Session::~Session() { net_->scheduler().cancel(timer_); }

void Session::log(const std::string& kind, const std::string& detail) {
  if (log_ != nullptr) log_->push_back({net::to_seconds(net_->now()), owner_, kind, detail});
}

void Session::receive(const net::Frame& frame) {
  if (!open_ || frame.kind != net::PayloadKind::Iec104) return;
  last_rx_at_ = net_->now();
  for (auto& item : reassembler_.feed(frame.payload)) {
    if (!open_) return;
    if (item.status != iec104::DecodeStatus::Ok) {
      log("framing_error", iec104::to_string(item.status));
      close("framing error");
      return;
    }
    handle(item.apdu);
  }
}

void Session::handle(const Apdu& apdu) {
  switch (apdu.apci.kind) {
    case FrameKind::I: {
      const auto check = seq_.on_i_frame(apdu.apci.tx, apdu.apci.rx);
      if (check == SeqCheck::OutOfOrder || check == SeqCheck::BadAck) {
        log("abort", (check == SeqCheck::OutOfOrder ? "out-of-order tx=" : "bad ack rx=") +
                         std::to_string(check == SeqCheck::OutOfOrder ? apdu.apci.tx : apdu.apci.rx) +
                         " expected v_r=" + std::to_string(seq_.v_r()) + " v_s=" + std::to_string(seq_.v_s()));
        close("sequence error");
        return;
      }
      if (check == SeqCheck::Resynced) {
        log("resync", "I(tx=" + std::to_string(apdu.apci.tx) + ",rx=" + std::to_string(apdu.apci.rx) + ")");
      }
      ++i_received_;
      if (first_unacked_rx_at_.count() < 0) first_unacked_rx_at_ = net_->now();
      while (static_cast<int>(unacked_sent_at_.size()) > seq_.unacked()) unacked_sent_at_.pop_front();
      if (const auto* asdu = apdu.asdu(); asdu != nullptr && callbacks_.on_asdu) callbacks_.on_asdu(*asdu);
      if (!open_) return;
      flush_queue();
      if (seq_.ack_due()) send_ack();
      break;
    }
    case FrameKind::S: {
      const auto check = seq_.on_ack(apdu.apci.rx);
      if (check == SeqCheck::BadAck) {
        log("abort", "bad ack rx=" + std::to_string(apdu.apci.rx) + " v_s=" + std::to_string(seq_.v_s()));
        close("sequence error");
        return;
      }
      if (check == SeqCheck::Resynced) log("resync", "S(rx=" + std::to_string(apdu.apci.rx) + ")");
      while (static_cast<int>(unacked_sent_at_.size()) > seq_.unacked()) unacked_sent_at_.pop_front();
      flush_queue();
      break;
    }
    case FrameKind::U:
      if (apdu.apci.u_function == UFunction::TestFrAct) {
        transmit(iec104::make_u_frame(UFunction::TestFrCon));
      } else if (apdu.apci.u_function == UFunction::TestFrCon) {
        testfr_sent_at_ = net::SimTime{-1};
      }
      if (callbacks_.on_u_frame) callbacks_.on_u_frame(apdu.apci.u_function);
      break;
  }
}

void Session::transmit(const Apdu& apdu) {
  net_->send(port_, local_port_, remote_ip_, remote_port_, net::PayloadKind::Iec104, iec104::encode(apdu));
}

void Session::send_asdu(iec104::Asdu asdu) {
  if (!open_) return;
  pending_.push_back(std::move(asdu));
  flush_queue();
}

void Session::flush_queue() {
  while (open_ && !pending_.empty() && seq_.window_open()) {
    Apdu apdu;
    apdu.apci = seq_.next_i_frame();
    apdu.body = std::move(pending_.front());
    pending_.pop_front();
    unacked_sent_at_.push_back(net_->now());
    first_unacked_rx_at_ = net::SimTime{-1};
    ++i_sent_;
    transmit(apdu);
  }
}

void Session::send_u(UFunction fn) {
  if (!open_) return;
  transmit(iec104::make_u_frame(fn));
}

void Session::send_ack() {
  transmit(Apdu{seq_.next_s_frame(), {}});
  first_unacked_rx_at_ = net::SimTime{-1};
}

void Session::housekeeping() {
  timer_ = 0;
  if (!open_) return;
  const auto now = net_->now();
  const auto& p = seq_.params();
  if (!unacked_sent_at_.empty() && now - unacked_sent_at_.front() >= p.t1) {
    log("abort", "t1 expired waiting for ack");
    close("t1 timeout");
    return;
  }
  if (testfr_sent_at_.count() >= 0 && now - testfr_sent_at_ >= p.t1) {
    log("abort", "TESTFR unanswered");
    close("t1 timeout");
    return;
  }
  if (seq_.received_unacked() > 0 && first_unacked_rx_at_.count() >= 0 && now - first_unacked_rx_at_ >= p.t2) {
    send_ack();
  }
  if (testfr_sent_at_.count() < 0 && now - last_rx_at_ >= p.t3) {
    transmit(iec104::make_u_frame(UFunction::TestFrAct));
    testfr_sent_at_ = now;
  }
  timer_ = net_->scheduler().after(kHousekeepingPeriod, [this] { housekeeping(); });
}

void Session::shutdown(const std::string& reason) {
  if (!open_) return;
  open_ = false;
  net_->scheduler().cancel(timer_);
  timer_ = 0;
  pending_.clear();
  if (callbacks_.on_closed) callbacks_.on_closed(reason);
}

void Session::close(const std::string& reason) {
  if (!open_) return;
  net_->send(port_, local_port_, remote_ip_, remote_port_, net::PayloadKind::Other,
             net::control_payload(net::Control::Close));
  log("close", reason);
  shutdown(reason);
}

void Session::closed_by_peer() {
  if (!open_) return;
  log("close", "closed by peer");
  shutdown("closed by peer");
}

}  // namespace fdilab::endpoints
