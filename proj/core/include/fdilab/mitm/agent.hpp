#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fdilab/c2/wire.hpp"
#include "fdilab/endpoints/session.hpp"
#include "fdilab/iec104/codec.hpp"
#include "fdilab/mitm/action.hpp"
#include "fdilab/mitm/proxy_core.hpp"
#include "fdilab/net/network.hpp"

namespace fdilab::mitm {

inline constexpr std::uint16_t kDefaultC2Port = 4711;

/// Per-frame processing delay: uniform [min, max] plus an occasional spike.
struct DelayModel {
  double min_ms = 1.0;
  double max_ms = 4.0;
  double spike_probability = 0.02;
  double spike_min_ms = 10.0;
  double spike_max_ms = 40.0;
};

struct AgentConfig {
  std::string name;
  net::EndpointIdentity identity;
  std::string endpoint;  // the intercepted endpoint
  std::uint16_t c2_port = kDefaultC2Port;
  ProxyOptions proxy;
  DelayModel delay;
  std::uint64_t seed = 1;
  std::size_t collect_capacity = 256;
};

enum class AgentState : std::uint8_t { Idle, Intercepting, ActionPending, ActionDone, ActionFailed };

std::string to_string(AgentState s);

struct ActionRecord {
  std::uint64_t seq = 0;
  Action action;
  double received_at = 0.0;
  std::optional<double> executed_at;
  AgentState state = AgentState::ActionPending;
  std::string reason;
};

/// Inline interceptor on one endpoint cable. Idle it bridges frames
/// untouched; after the first C2 action it terminates the channel and
/// re-emits every frame under its own mac.
class Agent final : public net::InlineAgent {
 public:
  Agent(net::Network& net, AgentConfig cfg, endpoints::EventLog* log = nullptr);
  ~Agent() override;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  /// Places the agent on the cable of `cfg.endpoint`.
  void insert();

  void on_from_switch(const net::Frame& frame) override;
  void on_from_endpoint(const net::Frame& frame) override;

  /// Executes an action locally (what a received C2 action does at its time).
  void execute(std::uint64_t seq);
  /// Queues an action as if it arrived over C2.
  void accept_action(std::uint64_t seq, const Action& action);

  [[nodiscard]] AgentState state() const;
  [[nodiscard]] bool intercepting() const { return intercepting_; }
  [[nodiscard]] bool channel_open() const { return channel_open_; }
  [[nodiscard]] const ProxyCore& proxy() const { return proxy_; }
  [[nodiscard]] const std::map<std::uint64_t, ActionRecord>& actions() const { return actions_; }
  [[nodiscard]] const AgentConfig& config() const { return cfg_; }
  [[nodiscard]] std::uint64_t duplicate_actions() const { return duplicates_; }

 private:
  struct Channel {
    net::Address mtu;
    net::Address rtu;
  };

  void handle_c2(const net::Frame& frame);
  void on_message(const c2::Message& m);
  void send_c2(c2::MessageType type, nlohmann::json body);
  void report(const ActionRecord& rec);
  nlohmann::json status_body() const;

  void process(Direction dir, const net::Frame& frame);
  void emit(Direction dir, net::Frame frame);
  net::Duration sample_delay();
  bool on_channel(Direction dir, const net::Frame& frame) const;
  void log(const std::string& kind, const std::string& detail);

  net::Network* net_;
  AgentConfig cfg_;
  endpoints::EventLog* log_;
  std::optional<net::InlineLink> link_;
  ProxyCore proxy_;
  std::mt19937_64 rng_;
  net::SimTime busy_until_{0};
  std::array<iec104::StreamReassembler, 2> reassembler_;
  std::optional<Channel> channel_;
  bool channel_open_ = false;
  bool data_started_ = false;
  bool intercepting_ = false;

  // C2 side
  std::optional<net::Address> coordinator_;
  c2::MessageReassembler c2_in_;
  std::uint64_t c2_seq_ = 0;
  std::map<std::uint64_t, ActionRecord> actions_;
  std::uint64_t duplicates_ = 0;
  std::vector<net::Scheduler::TimerId> timers_;
};

}  // namespace fdilab::mitm
