#include "fdilab/grid/grid_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>

namespace fdilab::grid {
namespace {

constexpr double kSnapKw = 1e-9;
constexpr double kBoundaryEpsilon = 1e-9;

double clamp_setpoint(double v) { return std::clamp(v, -1.0, 1.0); }

double target_power(const AssetSpec& a, double setpoint) {
  if (a.kind == AssetKind::Load) return -a.nominal_kw;
  return setpoint * a.nominal_kw;
}

// Relaxes one asset over `h` seconds toward its current target.
void relax(const GridSpec& spec, const AssetSpec& a, ProcessState& s, double h) {
  if (h <= 0.0) return;
  double& p = s.active_power[a.name];
  double target = target_power(a, s.setpoints[a.name]);
  if (a.kind == AssetKind::Battery) {
    double& soc = s.soc[a.name];
    if ((soc <= 0.0 && target > 0.0) || (soc >= 1.0 && target < 0.0)) target = 0.0;
  }
  const double tau = spec.params.time_constant_s;
  const double start = p;
  if (tau <= 0.0) {
    p = target;
  } else {
    p = target + (p - target) * std::exp(-h / tau);
  }
  if (std::fabs(p - target) < kSnapKw) p = target;
  if (a.kind == AssetKind::Battery && a.capacity_kwh > 0.0) {
    double& soc = s.soc[a.name];
    const double mean_kw = 0.5 * (start + p);
    soc -= mean_kw * h / 3600.0 / a.capacity_kwh;
    if (soc <= 0.0) {
      soc = 0.0;
      if (p > 0.0) p = 0.0;
    } else if (soc >= 1.0) {
      soc = 1.0;
      if (p < 0.0) p = 0.0;
    }
  }
}

void recompute_voltages(const GridSpec& spec, ProcessState& s) {
  for (const auto& mp : spec.measuring_points) s.voltages[mp.name] = voltage_at(spec, s, mp.name);
}

}  // namespace

const AssetSpec* GridSpec::asset(std::string_view name) const {
  for (const auto& a : assets) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const MeasuringPoint* GridSpec::measuring_point(std::string_view name) const {
  for (const auto& m : measuring_points) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const FeederSegment* GridSpec::segment(std::string_view name) const {
  for (const auto& s : segments) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void GridSpec::validate() const {
  std::set<std::string> names;
  for (const auto& a : assets) {
    if (!names.insert(a.name).second) throw GridError("duplicate asset " + a.name);
    if (!(a.nominal_kw > 0.0)) throw GridError("asset " + a.name + ": nominal power must be > 0");
    if (a.controllable && a.ioa_setpoint == 0) throw GridError("asset " + a.name + ": controllable asset needs a set-point IOA");
    if (a.kind == AssetKind::Load && a.controllable) throw GridError("asset " + a.name + ": loads are not controllable");
  }
  for (const auto& seg : segments) {
    if (!(seg.length_m > 0.0)) throw GridError("segment " + seg.name + ": length must be > 0");
    for (const auto& d : seg.downstream_assets) {
      if (asset(d) == nullptr) throw GridError("segment " + seg.name + ": unknown asset " + d);
    }
  }
  for (const auto& mp : measuring_points) {
    for (const auto& s : mp.upstream_segments) {
      if (segment(s) == nullptr) throw GridError("measuring point " + mp.name + ": unknown segment " + s);
    }
  }
  if (!(params.nominal_voltage > 0.0)) throw GridError("nominal voltage must be > 0");
  if (!(params.control_cycle_s > 0.0)) throw GridError("control cycle must be > 0");
}

GridSpec default_grid(double load1_kw, double load2_kw) {
  GridSpec g;
  g.assets = {
      {"PVI1", AssetKind::Pv, 12.0, true, "RTU1", 1001, 2001, 0.0, 1.0},
      {"PVI2", AssetKind::Pv, 36.0, true, "RTU4", 1002, 2002, 0.0, 1.0},
      {"BSSI", AssetKind::Battery, 22.0, true, "RTU3", 1003, 2003, 22.0, 0.0},
      {"LOAD1", AssetKind::Load, load1_kw, false, "RTU2", 0, 2004, 0.0, 0.0},
      {"LOAD2", AssetKind::Load, load2_kw, false, "RTU2", 0, 2005, 0.0, 0.0},
  };
  g.segments = {
      {"S1", 200.0, 0.208, 0.08, {"PVI1", "LOAD1"}},
      {"S2", 500.0, 0.208, 0.08, {"PVI2", "BSSI", "LOAD2"}},
  };
  g.measuring_points = {
      {"MP1", {}, {"RTU1"}, 3001},
      {"MP2", {"S1"}, {"RTU1"}, 3002},
      {"MP3", {"S2"}, {"RTU3", "RTU4"}, 3003},
  };
  return g;
}

bool operator==(const ProcessState& a, const ProcessState& b) {
  if (a.time != b.time || a.setpoints != b.setpoints || a.active_power != b.active_power ||
      a.voltages != b.voltages || a.soc != b.soc || a.pending.size() != b.pending.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.pending.size(); ++i) {
    if (a.pending[i].asset != b.pending[i].asset || a.pending[i].value != b.pending[i].value ||
        a.pending[i].effective_time != b.pending[i].effective_time) {
      return false;
    }
  }
  return true;
}

ProcessState initial_state(const GridSpec& spec) {
  ProcessState s;
  for (const auto& a : spec.assets) {
    const double sp = a.kind == AssetKind::Load ? 0.0 : clamp_setpoint(a.initial_setpoint);
    s.setpoints[a.name] = sp;
    s.active_power[a.name] = target_power(a, sp);
    if (a.kind == AssetKind::Battery) s.soc[a.name] = spec.params.initial_soc;
  }
  recompute_voltages(spec, s);
  return s;
}

ProcessState apply_setpoint(const GridSpec& spec, ProcessState state, std::string_view asset, double value) {
  const auto* a = spec.asset(asset);
  if (a == nullptr) throw UnknownAsset("unknown asset " + std::string(asset));
  if (!a->controllable) throw NotControllable("asset " + std::string(asset) + " is not controllable");
  const double cycle = spec.params.control_cycle_s;
  const double boundary = (std::floor(state.time / cycle + kBoundaryEpsilon) + 1.0) * cycle;
  state.pending.push_back({a->name, clamp_setpoint(value), boundary});
  return state;
}

ProcessState step(const GridSpec& spec, ProcessState state, double dt) {
  if (!(dt > 0.0)) throw GridError("step requires dt > 0");
  const double t0 = state.time;
  const double t1 = t0 + dt;
  for (const auto& a : spec.assets) {
    double t = t0;
    // Due commands for this asset in arrival order; later ones overwrite.
    for (auto it = state.pending.begin(); it != state.pending.end();) {
      if (it->asset == a.name && it->effective_time <= t1 + kBoundaryEpsilon) {
        const double at = std::clamp(it->effective_time, t0, t1);
        relax(spec, a, state, at - t);
        t = at;
        state.setpoints[a.name] = it->value;
        it = state.pending.erase(it);
      } else {
        ++it;
      }
    }
    relax(spec, a, state, t1 - t);
  }
  state.time = t1;
  recompute_voltages(spec, state);
  return state;
}

double voltage_at(const GridSpec& spec, const ProcessState& state, std::string_view mp_name) {
  const auto* mp = spec.measuring_point(mp_name);
  if (mp == nullptr) throw UnknownMeasuringPoint("unknown measuring point " + std::string(mp_name));
  const double vn = spec.params.nominal_voltage;
  double v = vn;
  for (const auto& seg_name : mp->upstream_segments) {
    const auto* seg = spec.segment(seg_name);
    if (seg == nullptr) throw GridError("unknown segment " + seg_name);
    double p_kw = 0.0;
    for (const auto& a : seg->downstream_assets) {
      auto it = state.active_power.find(a);
      if (it != state.active_power.end()) p_kw += it->second;
    }
    const double r = seg->r_ohm_per_km * seg->length_m / 1000.0;
    const double x = seg->x_ohm_per_km * seg->length_m / 1000.0;
    const double q_var = 0.0;
    v += (r * p_kw * 1000.0 + x * q_var) / vn;
  }
  return v;
}

GridModel::GridModel(GridSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  state_ = initial_state(spec_);
}

void GridModel::apply_setpoint(std::string_view asset, double value) {
  state_ = grid::apply_setpoint(spec_, std::move(state_), asset, value);
}

void GridModel::advance_to(double time, double tick) {
  while (true) {
    const double next = static_cast<double>(tick_index_ + 1) * tick;
    if (next > time + kBoundaryEpsilon) break;
    state_ = step(spec_, std::move(state_), next - state_.time);
    state_.time = next;
    ++tick_index_;
  }
}

void GridModel::sample() {
  const double t = state_.time;
  for (const auto& a : spec_.assets) {
    samples_.push_back({t, a.name, "P_kW", state_.active_power.at(a.name)});
    if (a.controllable) samples_.push_back({t, a.name, "setpoint", state_.setpoints.at(a.name)});
  }
  for (const auto& mp : spec_.measuring_points) {
    samples_.push_back({t, mp.name, "V_V", state_.voltages.at(mp.name)});
  }
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void GridModel::write_csv(std::ostream& out) const {
  out << "time_s,name,quantity,value\n";
  for (const auto& s : samples_) {
    out << format_number(s.time) << ',' << s.name << ',' << s.quantity << ',' << format_number(s.value) << '\n';
  }
}

}  // namespace fdilab::grid
