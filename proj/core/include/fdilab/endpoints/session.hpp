#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "fdilab/endpoints/sequence_state.hpp"
#include "fdilab/iec104/apdu.hpp"
#include "fdilab/iec104/codec.hpp"
#include "fdilab/net/network.hpp"

namespace fdilab::endpoints {

struct EndpointEvent {
  double t = 0.0;
  std::string endpoint;
  std::string kind;  // abort, resync, orphan, connect, close, ...
  std::string detail;
};

using EventLog = std::vector<EndpointEvent>;

/// One IEC-104 connection as seen by one endpoint: framing, sequence
/// bookkeeping, the k window, and the t1/t2/t3 timers.
class Session {
 public:
  struct Callbacks {
    std::function<void(const iec104::Asdu&)> on_asdu;
    std::function<void(iec104::UFunction)> on_u_frame;
    std::function<void(const std::string& reason)> on_closed;
  };

  Session(net::Network& net, net::PortHandle port, std::uint16_t local_port, net::Ipv4Address remote_ip,
          std::uint16_t remote_port, const SequenceParams& params, std::string owner, EventLog* log,
          Callbacks callbacks);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void receive(const net::Frame& frame);
  void send_asdu(iec104::Asdu asdu);
  void send_u(iec104::UFunction fn);
  /// Active close: notifies the peer, stops timers.
  void close(const std::string& reason);
  /// Peer closed: stop without notifying.
  void closed_by_peer();

  [[nodiscard]] bool is_open() const { return open_; }
  [[nodiscard]] const SequenceState& sequence() const { return seq_; }
  [[nodiscard]] std::uint16_t local_port() const { return local_port_; }
  [[nodiscard]] net::Ipv4Address remote_ip() const { return remote_ip_; }
  [[nodiscard]] std::uint16_t remote_port() const { return remote_port_; }
  [[nodiscard]] std::uint64_t i_frames_sent() const { return i_sent_; }
  [[nodiscard]] std::uint64_t i_frames_received() const { return i_received_; }
  [[nodiscard]] std::size_t queued() const { return pending_.size(); }

 private:
  void handle(const iec104::Apdu& apdu);
  void transmit(const iec104::Apdu& apdu);
  void flush_queue();
  void send_ack();
  void housekeeping();
  void log(const std::string& kind, const std::string& detail);
  void shutdown(const std::string& reason);

  net::Network* net_;
  net::PortHandle port_;
  std::uint16_t local_port_;
  net::Ipv4Address remote_ip_;
  std::uint16_t remote_port_;
  SequenceState seq_;
  std::string owner_;
  EventLog* log_;
  Callbacks callbacks_;
  iec104::StreamReassembler reassembler_;
  std::deque<iec104::Asdu> pending_;
  std::deque<net::SimTime> unacked_sent_at_;
  net::SimTime first_unacked_rx_at_{-1};
  net::SimTime last_rx_at_{0};
  net::SimTime testfr_sent_at_{-1};
  net::Scheduler::TimerId timer_ = 0;
  bool open_ = true;
  std::uint64_t i_sent_ = 0;
  std::uint64_t i_received_ = 0;
};

}  // namespace fdilab::endpoints
