#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdilab/c2/wire.hpp"
#include "fdilab/endpoints/session.hpp"
#include "fdilab/mitm/action.hpp"
#include "fdilab/net/network.hpp"

namespace fdilab::c2 {

struct AgentEndpoint {
  std::string name;
  net::Ipv4Address ip;
  std::uint16_t port = 4711;
};

struct PlanItem {
  double t = 0.0;
  std::string agent;
  mitm::Action action;  // at_time is overwritten with t
};

struct CoordinatorConfig {
  std::string name = "coordinator";
  std::vector<AgentEndpoint> agents;
  std::vector<PlanItem> plan;
  double start_time = 0.0;  // sessions open at this time
  double lead_time = 30.0;  // actions are shipped this long before they fire
  double heartbeat_period = 5.0;
  double heartbeat_timeout = 15.0;
  double retransmit_timeout = 2.0;
  int max_retries = 3;
  double connect_timeout = 3.0;
  std::uint16_t local_port_base = 40000;

  /// Throws std::invalid_argument.
  void validate() const;
};

enum class Outcome : std::uint8_t { Pending, Done, Failed };

struct ActionOutcome {
  std::uint64_t seq = 0;  // 0 until shipped
  std::string agent;
  mitm::Action action;
  std::optional<double> sent_at;
  std::optional<double> acked_at;
  std::optional<double> completed_at;
  int transmissions = 0;
  Outcome outcome = Outcome::Pending;
  std::string reason;
};

/// Remote controller of the inline agents. Attached as a participant outside
/// the process-network inventory.
class Coordinator final : public net::Host {
 public:
  Coordinator(net::Network& net, CoordinatorConfig cfg, endpoints::EventLog* log = nullptr);
  ~Coordinator() override;
  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  void start(const net::EndpointIdentity& identity, net::Duration link_latency);
  void on_frame(const net::Frame& frame) override;

  /// Marks everything still pending as failed; call once the clock stops.
  void finish();

  [[nodiscard]] const std::vector<ActionOutcome>& outcomes() const { return outcomes_; }
  [[nodiscard]] nlohmann::json report() const;
  [[nodiscard]] std::uint64_t duplicate_acks() const { return duplicate_acks_; }

 private:
  enum class SessionState : std::uint8_t { Idle, Connecting, Open, Unreachable };
  struct AgentSession {
    AgentEndpoint endpoint;
    SessionState state = SessionState::Idle;
    std::uint16_t local_port = 0;
    int connect_attempts = 0;
    std::uint64_t next_seq = 0;
    double last_rx = 0.0;
    std::optional<double> last_heartbeat;
    std::string agent_state = "Idle";
    std::uint64_t heartbeats_sent = 0;
    std::uint64_t statuses_received = 0;
    net::Scheduler::TimerId timer = 0;
    MessageReassembler inbound;
  };

  AgentSession* session_for(const std::string& agent);
  void connect(AgentSession& s);
  void on_connect_timeout(AgentSession& s);
  void on_open(AgentSession& s);
  void heartbeat(AgentSession& s);
  void mark_unreachable(AgentSession& s, const std::string& reason);
  void ship(std::size_t index);
  void transmit(std::size_t index);
  void on_retransmit_timer(std::size_t index);
  void on_message(AgentSession& s, const Message& m);
  void send(AgentSession& s, const Message& m);
  void log(const std::string& kind, const std::string& detail);

  net::Network* net_;
  CoordinatorConfig cfg_;
  endpoints::EventLog* log_;
  net::PortHandle port_{};
  net::EndpointIdentity identity_;
  std::vector<std::unique_ptr<AgentSession>> sessions_;
  std::vector<ActionOutcome> outcomes_;
  std::vector<net::Scheduler::TimerId> timers_;
  std::uint64_t messages_sent_ = 0;
  std::uint64_t messages_received_ = 0;
  std::uint64_t duplicate_acks_ = 0;
};

std::string to_string(Outcome o);

}  // namespace fdilab::c2
