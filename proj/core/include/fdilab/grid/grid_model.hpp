#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fdilab::grid {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class UnknownAsset : public GridError {
 public:
  using GridError::GridError;
};
class NotControllable : public GridError {
 public:
  using GridError::GridError;
};
class UnknownMeasuringPoint : public GridError {
 public:
  using GridError::GridError;
};

enum class AssetKind : std::uint8_t { Pv, Battery, Load };

struct AssetSpec {
  std::string name;
  AssetKind kind = AssetKind::Pv;
  double nominal_kw = 0.0;     // rating; for loads the constant consumption
  bool controllable = false;
  std::string rtu;
  std::uint32_t ioa_setpoint = 0;
  std::uint32_t ioa_power = 0;
  double capacity_kwh = 0.0;   // batteries only
  double initial_setpoint = 0.0;
};

struct FeederSegment {
  std::string name;
  double length_m = 0.0;
  double r_ohm_per_km = 0.208;
  double x_ohm_per_km = 0.08;
  std::vector<std::string> downstream_assets;
};

struct MeasuringPoint {
  std::string name;
  std::vector<std::string> upstream_segments;
  std::vector<std::string> reported_by;  // RTU names
  std::uint32_t ioa_voltage = 0;
};

struct GridParams {
  double nominal_voltage = 400.0;
  double control_cycle_s = 1.0;
  double time_constant_s = 0.5;
  double initial_soc = 0.5;
};

struct GridSpec {
  std::vector<AssetSpec> assets;
  std::vector<FeederSegment> segments;
  std::vector<MeasuringPoint> measuring_points;
  GridParams params;

  [[nodiscard]] const AssetSpec* asset(std::string_view name) const;
  [[nodiscard]] const MeasuringPoint* measuring_point(std::string_view name) const;
  [[nodiscard]] const FeederSegment* segment(std::string_view name) const;
  /// Throws GridError when references do not resolve or values are invalid.
  void validate() const;
};

/// MV/LV lab feeder: PVI1 (12 kVA) and LOAD1 on a 200 m string, PVI2
/// (36 kVA), BSSI (22 kW) and LOAD2 on a 500 m string.
GridSpec default_grid(double load1_kw = 10.0, double load2_kw = 10.0);

struct PendingSetpoint {
  std::string asset;
  double value = 0.0;
  double effective_time = 0.0;
};

struct ProcessState {
  double time = 0.0;
  std::map<std::string, double> setpoints;     // effective targets, fraction of rating
  std::map<std::string, double> active_power;  // kW, feed-in positive
  std::map<std::string, double> voltages;      // V per measuring point
  std::map<std::string, double> soc;           // batteries, 0..1
  std::vector<PendingSetpoint> pending;

  friend bool operator==(const ProcessState& a, const ProcessState& b);
};

ProcessState initial_state(const GridSpec& spec);

/// Records a set-point (clamped to [-1, 1]). It becomes the asset's target at
/// the next control-cycle boundary after `state.time`; the origin of the
/// command is not part of the state.
ProcessState apply_setpoint(const GridSpec& spec, ProcessState state, std::string_view asset, double value);

/// Advances by `dt` seconds: due set-points take effect at their boundary,
/// powers relax first-order toward targets, voltages are recomputed.
ProcessState step(const GridSpec& spec, ProcessState state, double dt);

/// V = V_n + sum over upstream segments of (R * P_down + X * Q) / V_n, with
/// P_down the net downstream active power in W (feed-in raises voltage), Q = 0.
double voltage_at(const GridSpec& spec, const ProcessState& state, std::string_view mp);

/// Stateful owner used by a running scenario; also records the measurement
/// series for export.
class GridModel {
 public:
  explicit GridModel(GridSpec spec);

  void apply_setpoint(std::string_view asset, double value);
  void advance_to(double time, double tick = 0.1);
  void sample();  // appends one row per quantity at the current time

  [[nodiscard]] const ProcessState& state() const { return state_; }
  [[nodiscard]] const GridSpec& spec() const { return spec_; }

  struct Sample {
    double time;
    std::string name;
    std::string quantity;  // P_kW, V_V, setpoint
    double value;
  };
  [[nodiscard]] const std::vector<Sample>& samples() const { return samples_; }
  void write_csv(std::ostream& out) const;

 private:
  GridSpec spec_;
  ProcessState state_;
  std::int64_t tick_index_ = 0;
  std::vector<Sample> samples_;
};

std::string format_number(double value);

}  // namespace fdilab::grid
