#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdilab/endpoints/session.hpp"
#include "fdilab/net/network.hpp"

namespace fdilab::endpoints {

struct ScheduledCommand {
  double t = 0.0;
  std::string rtu;
  std::uint32_t ioa = 0;
  double value = 0.0;
};

enum class TransactionState : std::uint8_t { Sent, Confirmed, Terminated, Failed };

std::string to_string(TransactionState s);

struct CommandTransaction {
  iec104::TypeId type_id = iec104::TypeId::C_SE_NC_1;
  std::string rtu;
  std::uint16_t common_address = 0;
  std::uint32_t ioa = 0;
  double value = 0.0;
  TransactionState state = TransactionState::Sent;
  double t_sent = 0.0;
  std::optional<double> t_con;
  std::optional<double> t_term;
  std::optional<double> t_failed;
  std::string reason;
};

/// An ActCon/ActTerm that matched no open transaction.
struct OrphanEvent {
  double t = 0.0;
  std::string rtu;
  std::uint16_t common_address = 0;
  iec104::TypeId type_id = iec104::TypeId::C_SE_NC_1;
  std::uint32_t ioa = 0;
  iec104::Cot cot = iec104::Cot::ActivationCon;
  double value = 0.0;
};

struct ReceivedMeasurement {
  double t = 0.0;
  std::string rtu;
  std::uint16_t common_address = 0;
  std::uint32_t ioa = 0;
  iec104::Cot cot = iec104::Cot::Periodic;
  float value = 0.0F;
};

struct MtuRtuLink {
  std::string name;
  net::Ipv4Address ip;
  std::uint16_t port = iec104::kDefaultPort;
  std::uint16_t common_address = 1;
};

struct MtuConfig {
  std::string name = "MTU";
  std::vector<MtuRtuLink> rtus;
  std::vector<ScheduledCommand> schedule;
  double interrogation_period = 10.0;  // 0 disables general interrogation
  double transaction_timeout = 10.0;
  double connect_timeout = 3.0;
  double reconnect_backoff = 1.0;
  double reconnect_backoff_max = 8.0;
  std::uint16_t ephemeral_base = 49152;
  SequenceParams sequence{};

  /// Throws std::invalid_argument.
  void validate() const;
};

/// IEC-104 controlling station: one session per RTU, scheduled set-points,
/// periodic general interrogation, reconnect on loss.
class Mtu final : public net::Host {
 public:
  Mtu(net::Network& net, MtuConfig cfg, EventLog* log = nullptr);
  ~Mtu() override;
  Mtu(const Mtu&) = delete;
  Mtu& operator=(const Mtu&) = delete;

  void start(const net::EndpointIdentity& identity, net::Duration link_latency);
  void on_frame(const net::Frame& frame) override;

  [[nodiscard]] const std::vector<CommandTransaction>& transactions() const { return transactions_; }
  [[nodiscard]] const std::vector<CommandTransaction>& interrogations() const { return interrogations_; }
  [[nodiscard]] const std::vector<OrphanEvent>& orphans() const { return orphans_; }
  [[nodiscard]] const std::vector<ReceivedMeasurement>& measurements() const { return measurements_; }
  [[nodiscard]] const MtuConfig& config() const { return cfg_; }
  [[nodiscard]] bool connected(const std::string& rtu) const;
  [[nodiscard]] const Session* session(const std::string& rtu) const;
  [[nodiscard]] std::uint64_t connects(const std::string& rtu) const;

  /// Sends a set-point now, outside the schedule.
  void send_setpoint(const std::string& rtu, std::uint32_t ioa, double value);

  /// JSON-lines {t_sent, t_con, t_term, rtu, ioa, value, state}.
  void write_transactions(std::ostream& out) const;

 private:
  enum class LinkState : std::uint8_t { Down, Connecting, Open };
  struct Link {
    MtuRtuLink cfg;
    LinkState state = LinkState::Down;
    std::uint16_t local_port = 0;
    std::unique_ptr<Session> session;
    std::vector<std::unique_ptr<Session>> retired;
    bool started = false;
    double backoff = 0.0;
    std::uint64_t connects = 0;
    net::Scheduler::TimerId timer = 0;
  };

  Link* link_by_name(const std::string& name);
  void connect(Link& link);
  void on_connect_timeout(Link& link);
  void schedule_reconnect(Link& link);
  void on_accept(Link& link);
  void on_closed(Link& link, const std::string& reason);
  void on_asdu(Link& link, const iec104::Asdu& asdu);
  void interrogate();
  void send_interrogation(Link& link);
  bool match_reply(std::vector<CommandTransaction>& list, const Link& link, const iec104::Asdu& asdu, std::uint32_t ioa);
  void fire(const ScheduledCommand& cmd);
  void expire(std::size_t index);
  void log(const std::string& kind, const std::string& detail);

  net::Network* net_;
  MtuConfig cfg_;
  EventLog* log_;
  net::PortHandle port_{};
  std::vector<std::unique_ptr<Link>> links_;
  std::uint16_t next_port_ = 0;
  std::vector<CommandTransaction> transactions_;
  std::vector<CommandTransaction> interrogations_;
  std::vector<OrphanEvent> orphans_;
  std::vector<ReceivedMeasurement> measurements_;
  std::vector<net::Scheduler::TimerId> timers_;
  net::Scheduler::TimerId gi_timer_ = 0;
};

}  // namespace fdilab::endpoints
