#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fdilab/net/address.hpp"
#include "fdilab/net/frame.hpp"
#include "fdilab/net/sim_clock.hpp"

namespace fdilab::net {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DuplicateIdentity : public NetworkError {
 public:
  using NetworkError::NetworkError;
};
class UnknownEndpoint : public NetworkError {
 public:
  using NetworkError::NetworkError;
};
class AlreadyIntercepted : public NetworkError {
 public:
  using NetworkError::NetworkError;
};
class UnknownLocation : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Receives frames addressed to an attached endpoint.
class Host {
 public:
  virtual ~Host() = default;
  virtual void on_frame(const Frame& frame) = 0;
};

class Network;

/// What an inline agent may do with the wire it sits on.
class InlineLink {
 public:
  InlineLink(Network& net, std::size_t port) : net_(&net), port_(port) {}

  void to_switch(Frame frame);
  void to_endpoint(Frame frame);
  [[nodiscard]] const EndpointIdentity& endpoint() const;
  [[nodiscard]] SimTime now() const;

 private:
  Network* net_;
  std::size_t port_;
};

/// Sits on the cable between one endpoint and the switch. Everything crossing
/// that cable is handed to the agent instead of being forwarded.
class InlineAgent {
 public:
  virtual ~InlineAgent() = default;
  virtual void on_from_switch(const Frame& frame) = 0;
  virtual void on_from_endpoint(const Frame& frame) = 0;
};

struct PortHandle {
  std::size_t index = 0;
  friend bool operator==(PortHandle, PortHandle) = default;
};

struct TapLocation {
  enum class Kind : std::uint8_t { Switch, Agent };
  Kind kind = Kind::Switch;
  // For Agent taps: the intercepted endpoint's name (the agent-to-endpoint wire).
  std::string endpoint;

  static TapLocation at_switch() { return {}; }
  static TapLocation agent_side(std::string endpoint_name) {
    return {Kind::Agent, std::move(endpoint_name)};
  }
};

using TapSink = std::function<void(const Frame&)>;

struct NetworkConfig {
  Duration switch_latency = millis(0.1);
  // Uniform extra delay in [0, link_jitter] per frame and hop; FIFO is kept.
  Duration link_jitter{0};
  std::uint64_t seed = 1;
};

struct FlowStats {
  std::uint64_t frames_sent = 0;
  std::uint64_t octets_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t octets_delivered = 0;
};

/// Virtual switched network. Endpoints attach to switch ports; the switch
/// stamps source identity from its port registry, forwards by destination ip,
/// and exposes tap points on the switch and on intercepted cables.
class Network {
 public:
  Network(Scheduler& scheduler, NetworkConfig config = {});

  /// `registered=false` attaches a participant that is not part of the
  /// process-network inventory (it shows up in the trace as foreign).
  PortHandle attach(const EndpointIdentity& identity, Duration link_latency, Host* host,
                    bool registered = true);
  void detach(std::string_view name);

  /// Places `agent` on the cable between `endpoint_name` and the switch. The
  /// agent's own identity is registered and routable (frames to agent.ip reach
  /// the agent).
  InlineLink insert_inline(std::string_view endpoint_name, const EndpointIdentity& agent_identity,
                           InlineAgent* agent);
  void remove_inline(std::string_view endpoint_name);

  void add_tap(const TapLocation& location, TapSink sink);

  /// Sends one frame from an attached endpoint; the frame is stamped with the
  /// port's registered mac/ip.
  void send(PortHandle from, std::uint16_t src_port, Ipv4Address dst_ip, std::uint16_t dst_port,
            PayloadKind kind, Bytes payload);

  /// Builds a frame with explicit addressing (agents forging identities).
  Frame make_frame(const Address& src, const Address& dst, PayloadKind kind, Bytes payload);
  [[nodiscard]] Address address_of(Ipv4Address ip, std::uint16_t port) const;

  [[nodiscard]] const EndpointIdentity& identity(PortHandle port) const;
  [[nodiscard]] std::optional<PortHandle> find(std::string_view name) const;
  [[nodiscard]] std::vector<EndpointIdentity> registry() const;
  [[nodiscard]] std::vector<EndpointIdentity> foreign() const;
  [[nodiscard]] const std::map<FlowKey, FlowId>& flows() const { return flow_ids_; }
  [[nodiscard]] const FlowStats& flow_stats(FlowId id) const;
  [[nodiscard]] Scheduler& scheduler() { return *scheduler_; }
  [[nodiscard]] SimTime now() const { return scheduler_->now(); }
  [[nodiscard]] bool intercepted(std::string_view endpoint_name) const;

 private:
  friend class InlineLink;

  struct Port {
    EndpointIdentity identity;
    Duration link_latency{0};
    Host* host = nullptr;
    bool registered = true;
    bool attached = true;
    InlineAgent* agent = nullptr;
    std::optional<EndpointIdentity> agent_identity;
    std::vector<TapSink> agent_taps;
    // FIFO clamps for jittered hops.
    SimTime last_to_host{0};
    SimTime last_to_switch{0};
  };

  FlowId flow_id_for(const FlowKey& key);
  Duration jitter();
  void enter_switch(Frame frame);
  void egress(std::size_t port_index, Frame frame);
  void deliver(std::size_t port_index, Frame frame);
  std::optional<std::size_t> route(Ipv4Address ip) const;
  std::size_t port_index_checked(std::string_view name) const;

  Scheduler* scheduler_;
  NetworkConfig config_;
  std::mt19937_64 rng_;
  std::vector<Port> ports_;
  std::vector<TapSink> switch_taps_;
  std::map<FlowKey, FlowId> flow_ids_;
  std::vector<FlowStats> flow_stats_;
};

}  // namespace fdilab::net
