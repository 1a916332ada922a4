#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fdilab/endpoints/session.hpp"
#include "fdilab/grid/grid_model.hpp"
#include "fdilab/net/network.hpp"

namespace fdilab::endpoints {

/// What an RTU can see and do in the process.
class ProcessInterface {
 public:
  virtual ~ProcessInterface() = default;
  virtual double active_power(const std::string& asset) = 0;
  virtual double voltage(const std::string& measuring_point) = 0;
  virtual void apply_setpoint(const std::string& asset, double value) = 0;
};

/// Adapter over a running grid model.
class GridProcess final : public ProcessInterface {
 public:
  explicit GridProcess(grid::GridModel& model) : model_(&model) {}
  double active_power(const std::string& asset) override { return model_->state().active_power.at(asset); }
  double voltage(const std::string& mp) override { return model_->state().voltages.at(mp); }
  void apply_setpoint(const std::string& asset, double value) override { model_->apply_setpoint(asset, value); }

 private:
  grid::GridModel* model_;
};

struct RtuConfig {
  std::string name;
  std::uint16_t common_address = 1;
  std::vector<grid::AssetSpec> assets;
  std::vector<grid::MeasuringPoint> measuring_points;
  double measurement_period = 1.0;
  double measurement_offset = 0.0;  // phase of the periodic report within the period
  SequenceParams sequence{.strict = true};

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Collects the assets and measuring points a grid assigns to `rtu_name`.
RtuConfig rtu_config_from_grid(const grid::GridSpec& grid, const std::string& rtu_name, std::uint16_t ca);

/// IEC-104 controlled station. Accepts one connection at a time on port 2404.
class Rtu final : public net::Host {
 public:
  Rtu(net::Network& net, RtuConfig cfg, ProcessInterface& process, EventLog* log = nullptr);
  ~Rtu() override;
  Rtu(const Rtu&) = delete;
  Rtu& operator=(const Rtu&) = delete;

  /// Attaches to the network and starts the measurement timer.
  void start(const net::EndpointIdentity& identity, net::Duration link_latency);
  void on_frame(const net::Frame& frame) override;

  [[nodiscard]] const RtuConfig& config() const { return cfg_; }
  [[nodiscard]] const Session* session() const { return session_.get(); }
  [[nodiscard]] bool data_transfer_active() const { return started_; }
  [[nodiscard]] net::PortHandle port() const { return port_; }
  [[nodiscard]] std::uint64_t connections_accepted() const { return accepted_; }
  [[nodiscard]] std::uint64_t aborts() const { return aborts_; }

 private:
  void on_asdu(const iec104::Asdu& asdu);
  void on_u_frame(iec104::UFunction fn);
  void report_periodic();
  void reply(iec104::Asdu asdu, iec104::Cot cot, bool negative = false);
  iec104::Asdu snapshot(iec104::Cot cot) const;
  void log(const std::string& kind, const std::string& detail);

  net::Network* net_;
  RtuConfig cfg_;
  ProcessInterface* process_;
  EventLog* log_;
  net::PortHandle port_{};
  std::unique_ptr<Session> session_;
  bool started_ = false;
  std::uint64_t period_index_ = 0;
  net::Scheduler::TimerId timer_ = 0;
  std::uint64_t accepted_ = 0;
  std::uint64_t aborts_ = 0;
};

}  // namespace fdilab::endpoints
