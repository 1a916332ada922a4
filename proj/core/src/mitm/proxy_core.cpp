#include "fdilab/mitm/proxy_core.hpp"

#include <algorithm>

#include "fdilab/iec104/codec.hpp"

namespace fdilab::mitm {

using iec104::Apdu;
using iec104::Asdu;
using iec104::Cot;
using iec104::FrameKind;
using iec104::seq_add;

namespace {

int offset(std::uint64_t plus, std::uint64_t minus) {
  // Reduced mod 32768 so large counts stay in int range.
  const auto diff = static_cast<std::int64_t>(plus % iec104::kSeqModulus) -
                    static_cast<std::int64_t>(minus % iec104::kSeqModulus);
  return static_cast<int>(diff);
}

Direction opposite(Direction d) { return d == Direction::ToRtu ? Direction::ToMtu : Direction::ToRtu; }

bool active(const Action& a, double now) { return now >= a.at_time && (!a.until || now < *a.until); }

}  // namespace

Apdu correct_sequences(const Apdu& apdu, Direction dir, const CorrectionState& cs) {
  Apdu out = apdu;
  if (apdu.apci.kind == FrameKind::U) return out;
  const bool enabled = dir == Direction::ToRtu ? cs.correct_to_rtu : cs.correct_to_mtu;
  if (!enabled) return out;
  const int tx_shift = dir == Direction::ToRtu ? offset(cs.inj_to_rtu, cs.drop_to_rtu) : offset(cs.inj_to_mtu, cs.drop_to_mtu);
  const int rx_shift = dir == Direction::ToRtu ? -offset(cs.inj_to_mtu, cs.drop_to_mtu) : -offset(cs.inj_to_rtu, cs.drop_to_rtu);
  if (apdu.apci.kind == FrameKind::I) out.apci.tx = seq_add(apdu.apci.tx, tx_shift);
  out.apci.rx = seq_add(apdu.apci.rx, rx_shift);
  return out;
}

ProxyCore::ProxyCore(ProxyOptions options) : options_(options) {
  counts_.correct_to_rtu = options.correct_to_rtu;
  counts_.correct_to_mtu = options.correct_to_mtu;
}

void ProxyCore::reset() {
  counts_ = CorrectionState{};
  counts_.correct_to_rtu = options_.correct_to_rtu;
  counts_.correct_to_mtu = options_.correct_to_mtu;
  streams_ = {};
  pending_replies_.clear();
}

std::uint16_t ProxyCore::expected_tx(Direction dir) const {
  return static_cast<std::uint16_t>(streams_[index(dir)].next_pos % iec104::kSeqModulus);
}

void ProxyCore::record_history(Direction d) {
  auto& s = streams_[index(d)];
  s.history[s.next_pos] = {injected(d), dropped(d)};
}

void ProxyCore::drop(Direction d) {
  ++dropped(d);
  record_history(d);
}

CorrectionState ProxyCore::counts_at_ack(Direction stream, std::uint16_t rx) {
  auto& s = streams_[index(stream)];
  const auto low = static_cast<std::uint16_t>(s.next_pos % iec104::kSeqModulus);
  const auto behind = static_cast<std::uint64_t>((low - rx + iec104::kSeqModulus) % iec104::kSeqModulus);
  const std::uint64_t pos = s.next_pos >= behind ? s.next_pos - behind : rx;
  auto it = s.history.upper_bound(pos);
  if (it != s.history.begin()) --it;
  CorrectionState view = counts_;
  if (stream == Direction::ToRtu) {
    view.inj_to_rtu = it->second.first;
    view.drop_to_rtu = it->second.second;
  } else {
    view.inj_to_mtu = it->second.first;
    view.drop_to_mtu = it->second.second;
  }
  s.history.erase(s.history.begin(), it);
  return view;
}

bool ProxyCore::swallow(const Asdu& asdu) {
  if (!options_.swallow_replies) return false;
  if (asdu.cot != Cot::ActivationCon && asdu.cot != Cot::ActivationTerm) return false;
  const std::uint32_t ioa = asdu.objects.empty() ? 0 : asdu.objects.front().ioa;
  const auto key = std::make_tuple(asdu.type_id, asdu.common_address, ioa);
  auto it = std::find(pending_replies_.begin(), pending_replies_.end(), key);
  if (it == pending_replies_.end()) return false;
  if (asdu.cot == Cot::ActivationTerm || asdu.negative_confirm) pending_replies_.erase(it);
  return true;
}

std::optional<Apdu> ProxyCore::forward(Direction dir, const Apdu& in, double now) {
  if (in.apci.kind == FrameKind::U) {
    ++stats_.forwarded;
    return in;
  }
  Apdu out = in;
  if (in.apci.kind == FrameKind::I) {
    if (Asdu* asdu = out.asdu()) {
      if (dir == Direction::ToMtu && swallow(*asdu)) {
        ++stats_.swallowed;
        drop(dir);
        return std::nullopt;
      }
      bool modified = false;
      for (const auto& rule : rules_) {
        if (rule.direction != dir || !active(rule, now) || (rule.match && !rule.match->matches(*asdu))) continue;
        if (rule.kind == ActionKind::Drop) {
          ++stats_.dropped;
          drop(dir);
          return std::nullopt;
        }
        if (rule.kind == ActionKind::Modify) {
          for (auto& io : asdu->objects) {
            if (rule.match && rule.match->ioa && io.ioa != *rule.match->ioa) continue;
            io.value = static_cast<float>(static_cast<double>(io.value) * rule.rewrite.scale + rule.rewrite.offset);
            modified = true;
          }
        } else if (rule.kind == ActionKind::Collect) {
          if (collected_.size() >= collect_capacity_) collected_.erase(collected_.begin());
          collected_.push_back({now, dir, *asdu});
        }
      }
      if (modified) ++stats_.modified;
    }
  }
  const Apdu tx_view = correct_sequences(out, dir, counts_);
  const Apdu rx_view = correct_sequences(out, dir, counts_at_ack(opposite(dir), in.apci.rx));
  out.apci.tx = tx_view.apci.tx;
  out.apci.rx = rx_view.apci.rx;
  auto& s = streams_[index(dir)];
  if (out.apci.kind == FrameKind::I) ++s.next_pos;
  s.last_rx = out.apci.rx;
  ++stats_.forwarded;
  return out;
}

Apdu ProxyCore::inject(Direction dir, const Asdu& asdu) {
  auto& s = streams_[index(dir)];
  Apdu out = iec104::make_i_frame(static_cast<std::uint16_t>(s.next_pos % iec104::kSeqModulus), s.last_rx, asdu);
  ++s.next_pos;
  ++injected(dir);
  record_history(dir);
  ++stats_.injected;
  if (dir == Direction::ToRtu && asdu.cot == Cot::Activation) {
    const std::uint32_t ioa = asdu.objects.empty() ? 0 : asdu.objects.front().ioa;
    pending_replies_.emplace_back(asdu.type_id, asdu.common_address, ioa);
  }
  return out;
}

void ProxyCore::add_rule(const Action& action) {
  if (action.kind == ActionKind::Modify || action.kind == ActionKind::Drop || action.kind == ActionKind::Collect) {
    rules_.push_back(action);
  }
}

}  // namespace fdilab::mitm
