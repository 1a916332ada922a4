#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdilab/c2/coordinator.hpp"
#include "fdilab/endpoints/mtu.hpp"
#include "fdilab/grid/grid_model.hpp"
#include "fdilab/ids/detectors.hpp"
#include "fdilab/mitm/agent.hpp"
#include "fdilab/net/trace.hpp"

namespace fdilab::scenario {

/// A scenario that does not validate. `path()` names the field, e.g.
/// "agents[0].endpoint".
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ComponentCrash : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeSpec {
  std::string name;
  std::string mac;
  std::string ip;
  double link_latency_ms = 0.05;
};

struct RtuSpec {
  NodeSpec node;
  std::uint16_t ca = 1;
  double measurement_offset = 0.0;
  bool strict = true;
};

struct MtuSpec {
  NodeSpec node;
  double interrogation_period = 10.0;
  bool strict = false;
  std::vector<endpoints::ScheduledCommand> schedule;
};

struct AgentSpec {
  NodeSpec node;
  std::string endpoint;
  std::uint16_t c2_port = mitm::kDefaultC2Port;
  mitm::ProxyOptions proxy;
  mitm::DelayModel delay;
};

struct CoordinatorSpec {
  NodeSpec node;
  double start_time = 520.0;
  double lead_time = 30.0;
  double heartbeat_period = 5.0;
  double heartbeat_timeout = 15.0;
  double retransmit_timeout = 2.0;
  int max_retries = 3;
  std::vector<c2::PlanItem> plan;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  double duration = 900.0;
  double compression = 0.01;  // wall seconds per simulated second
  double switch_latency_ms = 0.1;
  double link_jitter_ms = 0.0;
  grid::GridSpec grid = grid::default_grid();
  double grid_tick = 0.1;
  double sample_period = 1.0;
  MtuSpec mtu;
  std::vector<RtuSpec> rtus;
  std::vector<AgentSpec> agents;
  std::optional<CoordinatorSpec> coordinator;

  /// Throws ValidationError.
  void validate() const;
};

nlohmann::ordered_json to_json(const Scenario& s);
/// Throws ValidationError for structural and semantic problems.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario_file(const std::string& path);

std::vector<std::string> builtin_names();
[[nodiscard]] bool is_builtin(const std::string& name);
/// Throws ValidationError for an unknown name.
Scenario builtin(const std::string& name, std::uint64_t seed = 1);

struct RunOptions {
  // Empty writes nothing.
  std::string out_root;
  std::optional<double> compression;
  ids::Policy policy = ids::default_policy();
};

struct RunBundle {
  std::string dir;
  net::Trace switch_trace;
  std::map<std::string, net::Trace> agent_traces;
  std::string measurements_csv;
  std::vector<grid::GridModel::Sample> measurements;
  std::vector<endpoints::CommandTransaction> transactions;
  std::vector<endpoints::OrphanEvent> orphans;
  endpoints::EventLog events;
  std::map<std::string, std::uint64_t> rtu_aborts;
  std::map<std::string, std::uint64_t> mtu_connects;
  std::vector<c2::ActionOutcome> actions;
  nlohmann::ordered_json c2_report;
  nlohmann::ordered_json run_report;
  ids::Report report;
  std::vector<std::string> failures;
  bool partial = false;
};

/// Executes the timeline to `duration` on the simulated clock, analyses the
/// switch trace and, with an output root, writes run-<name>-<seed>/.
RunBundle run(const Scenario& scenario, const RunOptions& options = {});

/// Analyses one trace file and writes alerts.jsonl, summary.json and
/// rtt.csv (plus policy.json) into `out_dir`. An empty policy path selects
/// the default policy.
ids::Report detect(const std::string& trace_path, const std::string& policy_path, const std::string& out_dir);

/// Writes plot_measurements.csv, plot_rtt.csv and plot_txrx.csv into a run
/// directory and returns their paths. Throws MissingArtifact.
std::vector<std::string> export_plotdata(const std::string& bundle_dir);

/// One row per I/S frame on IEC-104 connections:
/// frame_index,t,flow_id,src_ip,dst_ip,frame_kind,tx,rx
std::string txrx_csv(const net::Trace& trace);

}  // namespace fdilab::scenario
