#include "fdilab/endpoints/sequence_state.hpp"

namespace fdilab::endpoints {

using iec104::seq_add;
using iec104::seq_diff;

int SequenceState::unacked() const {
  int d = static_cast<int>(v_s_) - static_cast<int>(ack_s_);
  if (d < 0) d += iec104::kSeqModulus;
  return d;
}

iec104::Apci SequenceState::next_i_frame() {
  iec104::Apci apci;
  apci.kind = iec104::FrameKind::I;
  apci.tx = v_s_;
  apci.rx = v_r_;
  v_s_ = seq_add(v_s_, 1);
  recv_unacked_ = 0;
  return apci;
}

iec104::Apci SequenceState::next_s_frame() {
  iec104::Apci apci;
  apci.kind = iec104::FrameKind::S;
  apci.rx = v_r_;
  recv_unacked_ = 0;
  return apci;
}

SeqCheck SequenceState::on_i_frame(std::uint16_t tx, std::uint16_t rx) {
  SeqCheck result = SeqCheck::Ok;
  if (tx != v_r_) {
    if (params_.strict) return SeqCheck::OutOfOrder;
    result = SeqCheck::Resynced;
  }
  v_r_ = seq_add(tx, 1);
  ++recv_unacked_;
  const SeqCheck ack = on_ack(rx);
  if (ack == SeqCheck::BadAck) return ack;
  return ack == SeqCheck::Resynced ? SeqCheck::Resynced : result;
}

SeqCheck SequenceState::on_ack(std::uint16_t rx) {
  const bool at_or_after_ack = seq_diff(ack_s_, rx) >= 0;
  const bool at_or_before_send = seq_diff(rx, v_s_) >= 0;
  if (at_or_after_ack && at_or_before_send) {
    ack_s_ = rx;
    return SeqCheck::Ok;
  }
  if (params_.strict) return SeqCheck::BadAck;
  // Lenient: an ack beyond what was sent acknowledges everything; a stale
  // ack is ignored.
  if (!at_or_before_send) ack_s_ = v_s_;
  return SeqCheck::Resynced;
}

}  // namespace fdilab::endpoints
