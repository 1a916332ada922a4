#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "fdilab/iec104/apdu.hpp"
#include "fdilab/mitm/action.hpp"

namespace fdilab::mitm {

/// Injection and drop counts per direction plus which directions get their
/// sequence fields rewritten.
struct CorrectionState {
  std::uint64_t inj_to_rtu = 0;
  std::uint64_t inj_to_mtu = 0;
  std::uint64_t drop_to_rtu = 0;
  std::uint64_t drop_to_mtu = 0;
  bool correct_to_rtu = true;
  bool correct_to_mtu = false;
};

/// Offset algebra for one frame travelling in `dir`. The sender's tx is
/// shifted into the receiver's count (plus injected, minus dropped toward the
/// receiver); the sender's rx is shifted back into the sender's own view of
/// the opposite stream. S-frames only carry rx; U-frames pass unchanged.
iec104::Apdu correct_sequences(const iec104::Apdu& apdu, Direction dir, const CorrectionState& cs);

struct ProxyOptions {
  bool correct_to_rtu = true;
  bool correct_to_mtu = false;
  // Drop the ActCon/ActTerm an RTU sends for an injected command.
  bool swallow_replies = false;
};

struct CollectedAsdu {
  double t = 0.0;
  Direction direction = Direction::ToMtu;
  iec104::Asdu asdu;
};

/// The protocol half of an inline agent: per-session sequence bookkeeping,
/// injection, and the active Modify/Drop/Collect rules. Works on APDUs only;
/// the agent wraps it with framing and addressing.
class ProxyCore {
 public:
  explicit ProxyCore(ProxyOptions options = {});

  /// Forgets all session state (a new connection). Rules are kept.
  void reset();

  /// One APDU travelling in `dir`. Returns what to forward, or nullopt when
  /// the frame is dropped.
  std::optional<iec104::Apdu> forward(Direction dir, const iec104::Apdu& in, double now);

  /// Builds a protocol-consistent I-frame carrying `asdu` toward `dir`.
  iec104::Apdu inject(Direction dir, const iec104::Asdu& asdu);

  void add_rule(const Action& action);
  void clear_rules() { rules_.clear(); }

  [[nodiscard]] const CorrectionState& counts() const { return counts_; }
  [[nodiscard]] const ProxyOptions& options() const { return options_; }
  [[nodiscard]] const std::vector<CollectedAsdu>& collected() const { return collected_; }
  [[nodiscard]] std::size_t rule_count() const { return rules_.size(); }
  /// Next sequence number the receiver in `dir` expects.
  [[nodiscard]] std::uint16_t expected_tx(Direction dir) const;

  struct Stats {
    std::uint64_t forwarded = 0;
    std::uint64_t modified = 0;
    std::uint64_t dropped = 0;
    std::uint64_t swallowed = 0;
    std::uint64_t injected = 0;
  };
  [[nodiscard]] const Stats& stats() const { return stats_; }

  void set_collect_capacity(std::size_t n) { collect_capacity_ = n; }

 private:
  struct Stream {
    std::uint64_t next_pos = 0;   // I-frames emitted toward this side
    std::uint16_t last_rx = 0;    // rx of the last frame emitted toward this side
    // Counts in effect for acknowledgements at or beyond each position.
    std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> history{{0, {0, 0}}};
  };

  static constexpr std::size_t index(Direction d) { return d == Direction::ToRtu ? 0 : 1; }
  std::uint64_t& injected(Direction d) { return d == Direction::ToRtu ? counts_.inj_to_rtu : counts_.inj_to_mtu; }
  std::uint64_t& dropped(Direction d) { return d == Direction::ToRtu ? counts_.drop_to_rtu : counts_.drop_to_mtu; }
  void record_history(Direction d);
  void drop(Direction d);
  // The counts the peer of `dir` had applied at the acknowledged position.
  CorrectionState counts_at_ack(Direction stream, std::uint16_t rx);
  bool swallow(const iec104::Asdu& asdu);

  ProxyOptions options_;
  CorrectionState counts_;
  std::array<Stream, 2> streams_{};
  std::vector<Action> rules_;
  std::vector<std::tuple<iec104::TypeId, std::uint16_t, std::uint32_t>> pending_replies_;
  std::vector<CollectedAsdu> collected_;
  std::size_t collect_capacity_ = 256;
  Stats stats_;
};

}  // namespace fdilab::mitm
