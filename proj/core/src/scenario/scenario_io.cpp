#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "fdilab/scenario/scenario.hpp"

namespace fdilab::scenario {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---- reading helpers ---------------------------------------------------------

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "(root)" : path, "expected an object");
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError(join(path, key), "unknown field");
  }
}

double number(const json& j, const std::string& path, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ValidationError(join(path, key), "missing");
  }
  const auto& v = j[key];
  if (!v.is_number() || !std::isfinite(v.get<double>())) throw ValidationError(join(path, key), "expected a finite number");
  return v.get<double>();
}

std::uint64_t integer(const json& j, const std::string& path, const char* key, std::uint64_t max,
                      std::optional<std::uint64_t> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ValidationError(join(path, key), "missing");
  }
  const auto& v = j[key];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::uint64_t>() > max) {
    throw ValidationError(join(path, key), "expected an integer in [0, " + std::to_string(max) + "]");
  }
  return v.get<std::uint64_t>();
}

bool boolean(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ValidationError(join(path, key), "expected true or false");
  return j[key].get<bool>();
}

std::string text(const json& j, const std::string& path, const char* key,
                 std::optional<std::string> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ValidationError(join(path, key), "missing");
  }
  if (!j[key].is_string()) throw ValidationError(join(path, key), "expected a string");
  return j[key].get<std::string>();
}

const json& array(const json& j, const std::string& path, const char* key) {
  static const json empty = json::array();
  if (!j.contains(key)) return empty;
  if (!j[key].is_array()) throw ValidationError(join(path, key), "expected an array");
  return j[key];
}

std::vector<std::string> strings(const json& j, const std::string& path, const char* key) {
  std::vector<std::string> out;
  const auto& a = array(j, path, key);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_string()) throw ValidationError(index(join(path, key), i), "expected a string");
    out.push_back(a[i].get<std::string>());
  }
  return out;
}

NodeSpec node_from(const json& j, const std::string& path, double default_latency) {
  NodeSpec n;
  n.name = text(j, path, "name");
  n.mac = text(j, path, "mac");
  n.ip = text(j, path, "ip");
  n.link_latency_ms = number(j, path, "link_latency_ms", default_latency);
  return n;
}

grid::AssetKind asset_kind(const std::string& s, const std::string& path) {
  if (s == "pv") return grid::AssetKind::Pv;
  if (s == "battery") return grid::AssetKind::Battery;
  if (s == "load") return grid::AssetKind::Load;
  throw ValidationError(path, "expected pv, battery or load");
}

std::string asset_kind_name(grid::AssetKind k) {
  switch (k) {
    case grid::AssetKind::Pv: return "pv";
    case grid::AssetKind::Battery: return "battery";
    case grid::AssetKind::Load: return "load";
  }
  return "pv";
}

grid::GridSpec grid_from(const json& j, const std::string& path) {
  require_object(j, path);
  only_keys(j, path, {"params", "tick_s", "sample_period_s", "assets", "segments", "measuring_points"});
  grid::GridSpec g = grid::default_grid();
  if (j.contains("params")) {
    const std::string p = join(path, "params");
    const auto& o = j["params"];
    require_object(o, p);
    only_keys(o, p, {"nominal_voltage", "control_cycle_s", "time_constant_s", "initial_soc"});
    g.params.nominal_voltage = number(o, p, "nominal_voltage", g.params.nominal_voltage);
    g.params.control_cycle_s = number(o, p, "control_cycle_s", g.params.control_cycle_s);
    g.params.time_constant_s = number(o, p, "time_constant_s", g.params.time_constant_s);
    g.params.initial_soc = number(o, p, "initial_soc", g.params.initial_soc);
  }
  if (j.contains("assets")) {
    g.assets.clear();
    const std::string p = join(path, "assets");
    const auto& a = array(j, path, "assets");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string ip = index(p, i);
      require_object(a[i], ip);
      only_keys(a[i], ip, {"name", "kind", "nominal_kw", "controllable", "rtu", "ioa_setpoint", "ioa_power",
                           "capacity_kwh", "initial_setpoint"});
      grid::AssetSpec s;
      s.name = text(a[i], ip, "name");
      s.kind = asset_kind(text(a[i], ip, "kind"), join(ip, "kind"));
      s.nominal_kw = number(a[i], ip, "nominal_kw");
      s.controllable = boolean(a[i], ip, "controllable", false);
      s.rtu = text(a[i], ip, "rtu");
      s.ioa_setpoint = static_cast<std::uint32_t>(integer(a[i], ip, "ioa_setpoint", 0xFFFFFF, 0));
      s.ioa_power = static_cast<std::uint32_t>(integer(a[i], ip, "ioa_power", 0xFFFFFF, 0));
      s.capacity_kwh = number(a[i], ip, "capacity_kwh", 0.0);
      s.initial_setpoint = number(a[i], ip, "initial_setpoint", 0.0);
      g.assets.push_back(s);
    }
  }
  if (j.contains("segments")) {
    g.segments.clear();
    const std::string p = join(path, "segments");
    const auto& a = array(j, path, "segments");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string ip = index(p, i);
      require_object(a[i], ip);
      only_keys(a[i], ip, {"name", "length_m", "r_ohm_per_km", "x_ohm_per_km", "downstream_assets"});
      grid::FeederSegment s;
      s.name = text(a[i], ip, "name");
      s.length_m = number(a[i], ip, "length_m");
      s.r_ohm_per_km = number(a[i], ip, "r_ohm_per_km", s.r_ohm_per_km);
      s.x_ohm_per_km = number(a[i], ip, "x_ohm_per_km", s.x_ohm_per_km);
      s.downstream_assets = strings(a[i], ip, "downstream_assets");
      g.segments.push_back(s);
    }
  }
  if (j.contains("measuring_points")) {
    g.measuring_points.clear();
    const std::string p = join(path, "measuring_points");
    const auto& a = array(j, path, "measuring_points");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string ip = index(p, i);
      require_object(a[i], ip);
      only_keys(a[i], ip, {"name", "upstream_segments", "reported_by", "ioa_voltage"});
      grid::MeasuringPoint m;
      m.name = text(a[i], ip, "name");
      m.upstream_segments = strings(a[i], ip, "upstream_segments");
      m.reported_by = strings(a[i], ip, "reported_by");
      m.ioa_voltage = static_cast<std::uint32_t>(integer(a[i], ip, "ioa_voltage", 0xFFFFFF, 0));
      g.measuring_points.push_back(m);
    }
  }
  return g;
}

ordered_json node_json(const NodeSpec& n) {
  ordered_json j;
  j["name"] = n.name;
  j["mac"] = n.mac;
  j["ip"] = n.ip;
  j["link_latency_ms"] = n.link_latency_ms;
  return j;
}

mitm::Action action_at(const json& j, const std::string& path) {
  try {
    return mitm::action_from_json(j);
  } catch (const mitm::InvalidAction& e) {
    throw ValidationError(path, e.what());
  } catch (const json::exception& e) {
    throw ValidationError(path, e.what());
  }
}

}  // namespace

// ---- validation ----------------------------------------------------------------

void Scenario::validate() const {
  if (name.empty()) throw ValidationError("name", "must not be empty");
  if (!(duration > 0.0)) throw ValidationError("duration", "must be > 0");
  if (compression < 0.0) throw ValidationError("compression", "must be >= 0");
  if (switch_latency_ms < 0.0) throw ValidationError("network.switch_latency_ms", "must be >= 0");
  if (link_jitter_ms < 0.0) throw ValidationError("network.link_jitter_ms", "must be >= 0");
  if (!(grid_tick > 0.0)) throw ValidationError("grid.tick_s", "must be > 0");
  if (!(sample_period >= grid_tick)) throw ValidationError("grid.sample_period_s", "must be >= tick_s");
  const double ratio = sample_period / grid_tick;
  if (std::fabs(ratio - std::round(ratio)) > 1e-9) throw ValidationError("grid.sample_period_s", "must be a multiple of tick_s");
  try {
    grid.validate();
  } catch (const grid::GridError& e) {
    throw ValidationError("grid", e.what());
  }

  std::set<std::string> names;
  std::set<std::uint32_t> ips;
  std::set<net::MacAddress> macs;
  auto check_node = [&](const NodeSpec& n, const std::string& path) {
    if (n.name.empty()) throw ValidationError(path + ".name", "must not be empty");
    if (!names.insert(n.name).second) throw ValidationError(path + ".name", "duplicate name " + n.name);
    const auto ip = net::Ipv4Address::parse(n.ip);
    if (!ip) throw ValidationError(path + ".ip", "not an IPv4 address");
    if (!ips.insert(ip->value).second) throw ValidationError(path + ".ip", "duplicate ip " + n.ip);
    const auto mac = net::MacAddress::parse(n.mac);
    if (!mac) throw ValidationError(path + ".mac", "not a mac address");
    if (!macs.insert(*mac).second) throw ValidationError(path + ".mac", "duplicate mac " + n.mac);
    if (!(n.link_latency_ms >= 0.0)) throw ValidationError(path + ".link_latency_ms", "must be >= 0");
  };

  check_node(mtu.node, "mtu");
  if (mtu.interrogation_period < 0.0) throw ValidationError("mtu.interrogation_period", "must be >= 0");
  if (rtus.empty()) throw ValidationError("rtus", "at least one RTU is required");
  std::set<std::uint16_t> cas;
  for (std::size_t i = 0; i < rtus.size(); ++i) {
    const auto path = index("rtus", i);
    check_node(rtus[i].node, path);
    if (!cas.insert(rtus[i].ca).second) throw ValidationError(path + ".ca", "duplicate common address");
    if (rtus[i].measurement_offset < 0.0) throw ValidationError(path + ".measurement_offset", "must be >= 0");
  }
  auto rtu_named = [&](const std::string& n) {
    for (const auto& r : rtus) {
      if (r.node.name == n) return true;
    }
    return false;
  };
  for (std::size_t i = 0; i < mtu.schedule.size(); ++i) {
    const auto path = index("mtu.schedule", i);
    const auto& c = mtu.schedule[i];
    if (!rtu_named(c.rtu)) throw ValidationError(path + ".rtu", "unknown RTU " + c.rtu);
    if (c.t < 0.0) throw ValidationError(path + ".t", "must be >= 0");
    if (!std::isfinite(c.value)) throw ValidationError(path + ".value", "must be finite");
  }
  for (std::size_t i = 0; i < grid.assets.size(); ++i) {
    if (!rtu_named(grid.assets[i].rtu)) {
      throw ValidationError(index("grid.assets", i) + ".rtu", "unknown RTU " + grid.assets[i].rtu);
    }
  }
  for (std::size_t i = 0; i < grid.measuring_points.size(); ++i) {
    const auto& mp = grid.measuring_points[i];
    for (std::size_t k = 0; k < mp.reported_by.size(); ++k) {
      if (!rtu_named(mp.reported_by[k])) {
        throw ValidationError(index(index("grid.measuring_points", i) + ".reported_by", k), "unknown RTU " + mp.reported_by[k]);
      }
    }
  }

  std::set<std::string> intercepted;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto path = index("agents", i);
    const auto& a = agents[i];
    check_node(a.node, path);
    if (!rtu_named(a.endpoint) && a.endpoint != mtu.node.name) {
      throw ValidationError(path + ".endpoint", "unknown endpoint " + a.endpoint);
    }
    if (!intercepted.insert(a.endpoint).second) throw ValidationError(path + ".endpoint", a.endpoint + " is already intercepted");
    const auto& d = a.delay;
    if (d.min_ms < 0.0 || d.max_ms < d.min_ms) throw ValidationError(path + ".delay", "need 0 <= min_ms <= max_ms");
    if (d.spike_probability < 0.0 || d.spike_probability > 1.0) {
      throw ValidationError(path + ".delay.spike_probability", "must be in [0, 1]");
    }
    if (d.spike_min_ms < 0.0 || d.spike_max_ms < d.spike_min_ms) {
      throw ValidationError(path + ".delay", "need 0 <= spike_min_ms <= spike_max_ms");
    }
  }

  if (coordinator) {
    const auto& c = *coordinator;
    check_node(c.node, "coordinator");
    if (agents.empty()) throw ValidationError("coordinator", "a coordinator needs at least one agent");
    if (c.start_time < 0.0) throw ValidationError("coordinator.start_time", "must be >= 0");
    if (c.lead_time < 0.0) throw ValidationError("coordinator.lead_time", "must be >= 0");
    if (!(c.heartbeat_period > 0.0)) throw ValidationError("coordinator.heartbeat_period", "must be > 0");
    if (!(c.heartbeat_timeout > 0.0)) throw ValidationError("coordinator.heartbeat_timeout", "must be > 0");
    if (!(c.retransmit_timeout > 0.0)) throw ValidationError("coordinator.retransmit_timeout", "must be > 0");
    if (c.max_retries < 0) throw ValidationError("coordinator.max_retries", "must be >= 0");
    for (std::size_t i = 0; i < c.plan.size(); ++i) {
      const auto path = index("coordinator.plan", i);
      const auto& item = c.plan[i];
      bool known = false;
      for (const auto& a : agents) known = known || a.node.name == item.agent;
      if (!known) throw ValidationError(path + ".agent", "unknown agent " + item.agent);
      if (item.t < 0.0) throw ValidationError(path + ".t", "must be >= 0");
      try {
        item.action.validate();
      } catch (const mitm::InvalidAction& e) {
        throw ValidationError(path + ".action", e.what());
      }
    }
  }
}

// ---- JSON ----------------------------------------------------------------------

ordered_json to_json(const Scenario& s) {
  ordered_json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["duration"] = s.duration;
  j["compression"] = s.compression;
  j["network"] = {{"switch_latency_ms", s.switch_latency_ms}, {"link_jitter_ms", s.link_jitter_ms}};

  ordered_json g;
  g["params"] = {{"nominal_voltage", s.grid.params.nominal_voltage},
                 {"control_cycle_s", s.grid.params.control_cycle_s},
                 {"time_constant_s", s.grid.params.time_constant_s},
                 {"initial_soc", s.grid.params.initial_soc}};
  g["tick_s"] = s.grid_tick;
  g["sample_period_s"] = s.sample_period;
  g["assets"] = ordered_json::array();
  for (const auto& a : s.grid.assets) {
    ordered_json o;
    o["name"] = a.name;
    o["kind"] = asset_kind_name(a.kind);
    o["nominal_kw"] = a.nominal_kw;
    o["controllable"] = a.controllable;
    o["rtu"] = a.rtu;
    o["ioa_setpoint"] = a.ioa_setpoint;
    o["ioa_power"] = a.ioa_power;
    o["capacity_kwh"] = a.capacity_kwh;
    o["initial_setpoint"] = a.initial_setpoint;
    g["assets"].push_back(o);
  }
  g["segments"] = ordered_json::array();
  for (const auto& seg : s.grid.segments) {
    ordered_json o;
    o["name"] = seg.name;
    o["length_m"] = seg.length_m;
    o["r_ohm_per_km"] = seg.r_ohm_per_km;
    o["x_ohm_per_km"] = seg.x_ohm_per_km;
    o["downstream_assets"] = seg.downstream_assets;
    g["segments"].push_back(o);
  }
  g["measuring_points"] = ordered_json::array();
  for (const auto& mp : s.grid.measuring_points) {
    ordered_json o;
    o["name"] = mp.name;
    o["upstream_segments"] = mp.upstream_segments;
    o["reported_by"] = mp.reported_by;
    o["ioa_voltage"] = mp.ioa_voltage;
    g["measuring_points"].push_back(o);
  }
  j["grid"] = g;

  ordered_json m = node_json(s.mtu.node);
  m["interrogation_period"] = s.mtu.interrogation_period;
  m["strict"] = s.mtu.strict;
  m["schedule"] = ordered_json::array();
  for (const auto& c : s.mtu.schedule) {
    ordered_json o;
    o["t"] = c.t;
    o["rtu"] = c.rtu;
    o["ioa"] = c.ioa;
    o["value"] = c.value;
    m["schedule"].push_back(o);
  }
  j["mtu"] = m;

  j["rtus"] = ordered_json::array();
  for (const auto& r : s.rtus) {
    ordered_json o = node_json(r.node);
    o["ca"] = r.ca;
    o["measurement_offset"] = r.measurement_offset;
    o["strict"] = r.strict;
    j["rtus"].push_back(o);
  }

  j["agents"] = ordered_json::array();
  for (const auto& a : s.agents) {
    ordered_json o = node_json(a.node);
    o["endpoint"] = a.endpoint;
    o["c2_port"] = a.c2_port;
    o["proxy"] = {{"correct_to_rtu", a.proxy.correct_to_rtu},
                  {"correct_to_mtu", a.proxy.correct_to_mtu},
                  {"swallow_replies", a.proxy.swallow_replies}};
    o["delay"] = {{"min_ms", a.delay.min_ms},
                  {"max_ms", a.delay.max_ms},
                  {"spike_probability", a.delay.spike_probability},
                  {"spike_min_ms", a.delay.spike_min_ms},
                  {"spike_max_ms", a.delay.spike_max_ms}};
    j["agents"].push_back(o);
  }

  if (s.coordinator) {
    const auto& c = *s.coordinator;
    ordered_json o = node_json(c.node);
    o["start_time"] = c.start_time;
    o["lead_time"] = c.lead_time;
    o["heartbeat_period"] = c.heartbeat_period;
    o["heartbeat_timeout"] = c.heartbeat_timeout;
    o["retransmit_timeout"] = c.retransmit_timeout;
    o["max_retries"] = c.max_retries;
    o["plan"] = ordered_json::array();
    for (const auto& item : c.plan) {
      ordered_json p;
      p["t"] = item.t;
      p["agent"] = item.agent;
      p["action"] = mitm::to_json(item.action);
      o["plan"].push_back(p);
    }
    j["coordinator"] = o;
  } else {
    j["coordinator"] = nullptr;
  }
  return j;
}

Scenario scenario_from_json(const json& j) {
  require_object(j, "");
  only_keys(j, "", {"name", "seed", "duration", "compression", "network", "grid", "mtu", "rtus", "agents", "coordinator"});
  Scenario s;
  s.name = text(j, "", "name");
  s.seed = integer(j, "", "seed", UINT64_MAX, 1);
  s.duration = number(j, "", "duration", 900.0);
  s.compression = number(j, "", "compression", 0.01);
  if (j.contains("network")) {
    const auto& n = j["network"];
    require_object(n, "network");
    only_keys(n, "network", {"switch_latency_ms", "link_jitter_ms"});
    s.switch_latency_ms = number(n, "network", "switch_latency_ms", s.switch_latency_ms);
    s.link_jitter_ms = number(n, "network", "link_jitter_ms", s.link_jitter_ms);
  }
  if (j.contains("grid")) {
    s.grid = grid_from(j["grid"], "grid");
    s.grid_tick = number(j["grid"], "grid", "tick_s", s.grid_tick);
    s.sample_period = number(j["grid"], "grid", "sample_period_s", s.sample_period);
  }

  if (!j.contains("mtu")) throw ValidationError("mtu", "missing");
  {
    const auto& m = j["mtu"];
    require_object(m, "mtu");
    only_keys(m, "mtu", {"name", "mac", "ip", "link_latency_ms", "interrogation_period", "strict", "schedule"});
    s.mtu.node = node_from(m, "mtu", 0.05);
    s.mtu.interrogation_period = number(m, "mtu", "interrogation_period", s.mtu.interrogation_period);
    s.mtu.strict = boolean(m, "mtu", "strict", false);
    const auto& sched = array(m, "mtu", "schedule");
    for (std::size_t i = 0; i < sched.size(); ++i) {
      const auto path = index("mtu.schedule", i);
      require_object(sched[i], path);
      only_keys(sched[i], path, {"t", "rtu", "ioa", "value"});
      endpoints::ScheduledCommand c;
      c.t = number(sched[i], path, "t");
      c.rtu = text(sched[i], path, "rtu");
      c.ioa = static_cast<std::uint32_t>(integer(sched[i], path, "ioa", 0xFFFFFF));
      c.value = number(sched[i], path, "value");
      s.mtu.schedule.push_back(c);
    }
  }

  const auto& rtus = array(j, "", "rtus");
  for (std::size_t i = 0; i < rtus.size(); ++i) {
    const auto path = index("rtus", i);
    require_object(rtus[i], path);
    only_keys(rtus[i], path, {"name", "mac", "ip", "link_latency_ms", "ca", "measurement_offset", "strict"});
    RtuSpec r;
    r.node = node_from(rtus[i], path, 0.05);
    r.ca = static_cast<std::uint16_t>(integer(rtus[i], path, "ca", 0xFFFF));
    r.measurement_offset = number(rtus[i], path, "measurement_offset", 0.0);
    r.strict = boolean(rtus[i], path, "strict", true);
    s.rtus.push_back(r);
  }

  const auto& agents = array(j, "", "agents");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto path = index("agents", i);
    const auto& o = agents[i];
    require_object(o, path);
    only_keys(o, path, {"name", "mac", "ip", "link_latency_ms", "endpoint", "c2_port", "proxy", "delay"});
    AgentSpec a;
    a.node = node_from(o, path, 0.05);
    a.endpoint = text(o, path, "endpoint");
    a.c2_port = static_cast<std::uint16_t>(integer(o, path, "c2_port", 0xFFFF, mitm::kDefaultC2Port));
    if (o.contains("proxy")) {
      const auto p = path + ".proxy";
      require_object(o["proxy"], p);
      only_keys(o["proxy"], p, {"correct_to_rtu", "correct_to_mtu", "swallow_replies"});
      a.proxy.correct_to_rtu = boolean(o["proxy"], p, "correct_to_rtu", a.proxy.correct_to_rtu);
      a.proxy.correct_to_mtu = boolean(o["proxy"], p, "correct_to_mtu", a.proxy.correct_to_mtu);
      a.proxy.swallow_replies = boolean(o["proxy"], p, "swallow_replies", a.proxy.swallow_replies);
    }
    if (o.contains("delay")) {
      const auto p = path + ".delay";
      const auto& d = o["delay"];
      require_object(d, p);
      only_keys(d, p, {"min_ms", "max_ms", "spike_probability", "spike_min_ms", "spike_max_ms"});
      a.delay.min_ms = number(d, p, "min_ms", a.delay.min_ms);
      a.delay.max_ms = number(d, p, "max_ms", a.delay.max_ms);
      a.delay.spike_probability = number(d, p, "spike_probability", a.delay.spike_probability);
      a.delay.spike_min_ms = number(d, p, "spike_min_ms", a.delay.spike_min_ms);
      a.delay.spike_max_ms = number(d, p, "spike_max_ms", a.delay.spike_max_ms);
    }
    s.agents.push_back(a);
  }

  if (j.contains("coordinator") && !j["coordinator"].is_null()) {
    const auto& o = j["coordinator"];
    require_object(o, "coordinator");
    only_keys(o, "coordinator", {"name", "mac", "ip", "link_latency_ms", "start_time", "lead_time", "heartbeat_period",
                                 "heartbeat_timeout", "retransmit_timeout", "max_retries", "plan"});
    CoordinatorSpec c;
    c.node = node_from(o, "coordinator", 0.05);
    c.start_time = number(o, "coordinator", "start_time", c.start_time);
    c.lead_time = number(o, "coordinator", "lead_time", c.lead_time);
    c.heartbeat_period = number(o, "coordinator", "heartbeat_period", c.heartbeat_period);
    c.heartbeat_timeout = number(o, "coordinator", "heartbeat_timeout", c.heartbeat_timeout);
    c.retransmit_timeout = number(o, "coordinator", "retransmit_timeout", c.retransmit_timeout);
    c.max_retries = static_cast<int>(integer(o, "coordinator", "max_retries", 100, 3));
    const auto& plan = array(o, "coordinator", "plan");
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const auto path = index("coordinator.plan", i);
      require_object(plan[i], path);
      only_keys(plan[i], path, {"t", "agent", "action"});
      c2::PlanItem item;
      item.t = number(plan[i], path, "t");
      item.agent = text(plan[i], path, "agent");
      if (!plan[i].contains("action")) throw ValidationError(path + ".action", "missing");
      item.action = action_at(plan[i]["action"], path + ".action");
      c.plan.push_back(item);
    }
    s.coordinator = c;
  }
  s.validate();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path, "cannot open scenario file");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError(path, "not valid JSON");
  return scenario_from_json(j);
}

}  // namespace fdilab::scenario
