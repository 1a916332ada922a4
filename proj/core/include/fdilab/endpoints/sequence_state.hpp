#pragma once

#include <cstdint>

#include "fdilab/iec104/codec.hpp"
#include "fdilab/net/sim_clock.hpp"

namespace fdilab::endpoints {

/// IEC-104 flow-control parameters. Defaults are the standard's.
struct SequenceParams {
  int k = 12;
  int w = 8;
  net::Duration t1 = net::from_seconds(15.0);
  net::Duration t2 = net::from_seconds(10.0);
  net::Duration t3 = net::from_seconds(20.0);
  bool strict = false;
};

enum class SeqCheck : std::uint8_t {
  Ok,
  Resynced,     // lenient mode accepted an out-of-order tx or a bad ack
  OutOfOrder,   // strict: tx != v_r
  BadAck,       // strict: rx outside [ack_s, v_s]
};

/// Per-connection send/receive counters.
class SequenceState {
 public:
  explicit SequenceState(const SequenceParams& params = {}) : params_(params) {}

  [[nodiscard]] std::uint16_t v_s() const { return v_s_; }
  [[nodiscard]] std::uint16_t v_r() const { return v_r_; }
  [[nodiscard]] std::uint16_t ack_s() const { return ack_s_; }
  [[nodiscard]] int unacked() const;
  [[nodiscard]] int received_unacked() const { return recv_unacked_; }
  [[nodiscard]] bool window_open() const { return unacked() < params_.k; }
  [[nodiscard]] bool ack_due() const { return recv_unacked_ >= params_.w; }
  [[nodiscard]] const SequenceParams& params() const { return params_; }

  /// Numbers the next outgoing I-frame; piggybacks the receive ack.
  iec104::Apci next_i_frame();
  /// Acknowledges everything received so far.
  iec104::Apci next_s_frame();

  SeqCheck on_i_frame(std::uint16_t tx, std::uint16_t rx);
  SeqCheck on_ack(std::uint16_t rx);

 private:
  SequenceParams params_;
  std::uint16_t v_s_ = 0;
  std::uint16_t v_r_ = 0;
  std::uint16_t ack_s_ = 0;
  int recv_unacked_ = 0;
};

}  // namespace fdilab::endpoints
