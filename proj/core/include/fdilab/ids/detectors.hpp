#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdilab/iec104/apdu.hpp"
#include "fdilab/ids/alert.hpp"
#include "fdilab/ids/policy.hpp"
#include "fdilab/net/trace.hpp"

namespace fdilab::ids {

/// One IEC-104 connection, named by its client and server sockets.
struct Connection {
  net::Ipv4Address client_ip;
  std::uint16_t client_port = 0;
  net::Ipv4Address server_ip;
  std::uint16_t server_port = 0;

  friend auto operator<=>(const Connection&, const Connection&) = default;
};

/// A trace frame after the shared decode pass.
struct FrameView {
  std::size_t index = 0;
  const net::Frame* frame = nullptr;
  double t = 0.0;
  std::optional<net::Control> control;
  // Set for frames to or from an IEC-104 server port.
  std::optional<Connection> connection;
  bool from_server = false;
  std::vector<iec104::Apdu> apdus;  // decoded, well-formed only
};

struct RttSample {
  std::size_t frame_index = 0;
  double t = 0.0;
  net::FlowId flow_id = 0;
  double rtt_ms = 0.0;
  bool outlier = false;
};

struct RttFlowSummary {
  net::FlowId flow_id = 0;
  std::size_t samples = 0;
  double median_ms = 0.0;
  double mad_ms = 0.0;
  double threshold_ms = 0.0;
  std::size_t outliers = 0;
  bool too_short = false;  // no verdict
};

struct Report {
  std::size_t frames = 0;
  std::vector<Alert> alerts;
  std::vector<RttSample> rtt;
  std::vector<RttFlowSummary> rtt_flows;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t count(Indicator i) const;
};

/// Per-indicator state machine fed by the shared decode pass.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_frame(const FrameView& view) = 0;
  virtual void finish(Report& report) = 0;
};

struct DetectorOptions {
  // Known participants; empty means the trace registry.
  std::vector<net::Ipv4Address> known;
  double k_mad = 5.0;
  std::size_t rtt_min_samples = 20;
  double mad_floor_ms = 0.001;
  double confirm_timeout = 10.0;
  Policy policy = default_policy();
};

std::unique_ptr<Observer> make_observer(Indicator indicator, const net::Trace& trace, const DetectorOptions& opts);

/// Runs the given observers over one decode pass of `trace`.
Report run_observers(const net::Trace& trace, std::vector<std::unique_ptr<Observer>>& observers);

/// All six indicators in one pass.
Report analyze(const net::Trace& trace, const DetectorOptions& opts = {});
/// A single indicator on its own pass.
Report analyze_one(const net::Trace& trace, Indicator indicator, const DetectorOptions& opts = {});

std::vector<Alert> detect_mac_ip(const net::Trace& trace);
/// Throws std::invalid_argument when `known` is empty.
std::vector<Alert> detect_new_participant(const net::Trace& trace, const std::vector<net::Ipv4Address>& known);
std::vector<Alert> detect_rtt_outliers(const net::Trace& trace, double k_mad = 5.0);
std::vector<Alert> detect_flow_anomaly(const net::Trace& trace);
std::vector<Alert> detect_seq_inconsistency(const net::Trace& trace);
std::vector<Alert> detect_process_implausible(const net::Trace& trace, const Policy& policy);

// Robust statistics used by the RTT rule.
double median(std::vector<double> values);
double median_absolute_deviation(const std::vector<double>& values);

void write_alerts(std::ostream& out, const std::vector<Alert>& alerts);
std::vector<Alert> read_alerts(std::istream& in);
nlohmann::ordered_json summary_json(const Report& report);
void write_rtt_csv(std::ostream& out, const Report& report);

}  // namespace fdilab::ids
