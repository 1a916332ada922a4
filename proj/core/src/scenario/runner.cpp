#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "fdilab/endpoints/rtu.hpp"
#include "fdilab/scenario/scenario.hpp"

namespace fdilab::scenario {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

net::EndpointIdentity identity_of(const NodeSpec& n, std::uint16_t port) {
  return {n.name, *net::MacAddress::parse(n.mac), *net::Ipv4Address::parse(n.ip), port};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComponentCrash("cannot write " + path.string());
  out << content;
}

std::string events_jsonl(const endpoints::EventLog& log) {
  std::ostringstream out;
  for (const auto& e : log) {
    ordered_json j;
    j["t"] = e.t;
    j["endpoint"] = e.endpoint;
    j["kind"] = e.kind;
    j["detail"] = e.detail;
    out << j.dump() << '\n';
  }
  return out.str();
}

// Owns every component of one run; members are destroyed in reverse order so
// endpoints cancel their timers before the scheduler goes away.
struct Testbed {
  explicit Testbed(const Scenario& s, double compression)
      : net(sched, {net::millis(s.switch_latency_ms), net::millis(s.link_jitter_ms), derive_seed(s.seed, 0)}),
        grid(s.grid),
        process(grid) {
    sched.set_compression(compression);
  }

  net::Scheduler sched;
  net::Network net;
  grid::GridModel grid;
  endpoints::GridProcess process;
  endpoints::EventLog log;
  std::vector<std::unique_ptr<endpoints::Rtu>> rtus;
  std::unique_ptr<endpoints::Mtu> mtu;
  std::vector<std::unique_ptr<mitm::Agent>> agents;
  std::unique_ptr<c2::Coordinator> coordinator;
  std::unique_ptr<net::TraceRecorder> switch_tap;
  std::vector<std::unique_ptr<net::TraceRecorder>> agent_taps;
  std::function<void(std::int64_t)> tick;
};

ordered_json run_report(const Scenario& s, const Testbed& tb, const RunBundle& b) {
  ordered_json r;
  r["scenario"] = s.name;
  r["seed"] = s.seed;
  r["duration"] = s.duration;
  r["partial"] = b.partial;
  r["failures"] = b.failures;
  r["frames"] = {{"switch", b.switch_trace.frames.size()}};
  for (const auto& [name, t] : b.agent_traces) r["frames"][name] = t.frames.size();

  ordered_json mtu;
  mtu["connects"] = b.mtu_connects;
  std::map<std::string, std::size_t> by_state;
  for (const auto& t : b.transactions) ++by_state[endpoints::to_string(t.state)];
  mtu["transactions"] = by_state;
  mtu["interrogations"] = tb.mtu ? tb.mtu->interrogations().size() : 0;
  mtu["orphans"] = b.orphans.size();
  mtu["measurements"] = tb.mtu ? tb.mtu->measurements().size() : 0;
  r["mtu"] = mtu;

  auto rtus = ordered_json::array();
  for (const auto& rtu : tb.rtus) {
    ordered_json o;
    o["name"] = rtu->config().name;
    o["connections"] = rtu->connections_accepted();
    o["aborts"] = rtu->aborts();
    rtus.push_back(o);
  }
  r["rtus"] = rtus;

  auto agents = ordered_json::array();
  for (const auto& a : tb.agents) {
    ordered_json o;
    o["name"] = a->config().name;
    o["endpoint"] = a->config().endpoint;
    o["state"] = mitm::to_string(a->state());
    o["intercepting"] = a->intercepting();
    const auto& st = a->proxy().stats();
    o["stats"] = {{"forwarded", st.forwarded}, {"modified", st.modified}, {"dropped", st.dropped},
                  {"swallowed", st.swallowed}, {"injected", st.injected}};
    const auto& c = a->proxy().counts();
    o["counts"] = {{"inj_to_rtu", c.inj_to_rtu}, {"inj_to_mtu", c.inj_to_mtu}, {"drop_to_rtu", c.drop_to_rtu},
                   {"drop_to_mtu", c.drop_to_mtu}};
    o["duplicate_actions"] = a->duplicate_actions();
    agents.push_back(o);
  }
  r["agents"] = agents;
  ordered_json counts;
  for (auto i : ids::kAllIndicators) counts[ids::to_string(i)] = b.report.count(i);
  r["alerts"] = counts;
  return r;
}

void write_detection(const fs::path& dir, const ids::Report& report, const ids::Policy& policy) {
  write_file(dir / "policy.json", ids::to_json(policy).dump(2) + "\n");
  std::ostringstream alerts;
  ids::write_alerts(alerts, report.alerts);
  write_file(dir / "alerts.jsonl", alerts.str());
  write_file(dir / "summary.json", ids::summary_json(report).dump(2) + "\n");
  std::ostringstream rtt;
  ids::write_rtt_csv(rtt, report);
  write_file(dir / "rtt.csv", rtt.str());
}

}  // namespace

RunBundle run(const Scenario& scenario, const RunOptions& options) {
  scenario.validate();
  RunBundle b;
  const double compression = options.compression.value_or(scenario.compression);
  auto tb = std::make_unique<Testbed>(scenario, compression);
  auto& net = tb->net;

  try {
    for (const auto& r : scenario.rtus) {
      auto cfg = endpoints::rtu_config_from_grid(scenario.grid, r.node.name, r.ca);
      cfg.measurement_offset = r.measurement_offset;
      cfg.sequence.strict = r.strict;
      tb->rtus.push_back(std::make_unique<endpoints::Rtu>(net, cfg, tb->process, &tb->log));
      tb->rtus.back()->start(identity_of(r.node, iec104::kDefaultPort), net::millis(r.node.link_latency_ms));
    }

    endpoints::MtuConfig mcfg;
    mcfg.name = scenario.mtu.node.name;
    for (const auto& r : scenario.rtus) {
      mcfg.rtus.push_back({r.node.name, *net::Ipv4Address::parse(r.node.ip), iec104::kDefaultPort, r.ca});
    }
    mcfg.schedule = scenario.mtu.schedule;
    mcfg.interrogation_period = scenario.mtu.interrogation_period;
    mcfg.sequence.strict = scenario.mtu.strict;
    tb->mtu = std::make_unique<endpoints::Mtu>(net, mcfg, &tb->log);

    net::TraceMeta meta{scenario.name, "switch", 0.0, compression};
    tb->switch_tap = std::make_unique<net::TraceRecorder>(net, net::TapLocation::at_switch(), meta);

    for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
      const auto& a = scenario.agents[i];
      mitm::AgentConfig acfg;
      acfg.name = a.node.name;
      acfg.identity = identity_of(a.node, a.c2_port);
      acfg.endpoint = a.endpoint;
      acfg.c2_port = a.c2_port;
      acfg.proxy = a.proxy;
      acfg.delay = a.delay;
      acfg.seed = derive_seed(scenario.seed, i + 1);
      tb->agents.push_back(std::make_unique<mitm::Agent>(net, acfg, &tb->log));
      tb->agents.back()->insert();
      net::TraceMeta am{scenario.name, "agent:" + a.endpoint, 0.0, compression};
      tb->agent_taps.push_back(std::make_unique<net::TraceRecorder>(net, net::TapLocation::agent_side(a.endpoint), am));
    }

    tb->mtu->start(identity_of(scenario.mtu.node, mcfg.ephemeral_base), net::millis(scenario.mtu.node.link_latency_ms));

    if (scenario.coordinator) {
      const auto& c = *scenario.coordinator;
      c2::CoordinatorConfig ccfg;
      ccfg.name = c.node.name;
      for (const auto& a : scenario.agents) {
        ccfg.agents.push_back({a.node.name, *net::Ipv4Address::parse(a.node.ip), a.c2_port});
      }
      ccfg.plan = c.plan;
      ccfg.start_time = c.start_time;
      ccfg.lead_time = c.lead_time;
      ccfg.heartbeat_period = c.heartbeat_period;
      ccfg.heartbeat_timeout = c.heartbeat_timeout;
      ccfg.retransmit_timeout = c.retransmit_timeout;
      ccfg.max_retries = c.max_retries;
      tb->coordinator = std::make_unique<c2::Coordinator>(net, ccfg, &tb->log);
      tb->coordinator->start(identity_of(c.node, ccfg.local_port_base), net::millis(c.node.link_latency_ms));
    }

    const auto per_sample = static_cast<std::int64_t>(std::llround(scenario.sample_period / scenario.grid_tick));
    const double tick = scenario.grid_tick;
    Testbed* raw = tb.get();
    tb->tick = [raw, per_sample, tick](std::int64_t k) {
      raw->grid.advance_to(static_cast<double>(k) * tick, tick);
      if (k % per_sample == 0) raw->grid.sample();
      raw->sched.at(net::from_seconds(static_cast<double>(k + 1) * tick), [raw, k] { raw->tick(k + 1); });
    };
    tb->sched.at(net::SimTime{0}, [raw] { raw->tick(0); });

    tb->sched.run_until(net::from_seconds(scenario.duration));
    if (tb->coordinator) tb->coordinator->finish();
  } catch (const std::exception& e) {
    b.partial = true;
    b.failures.push_back(std::string("component crash: ") + e.what());
  }

  if (tb->switch_tap) b.switch_trace = tb->switch_tap->trace();
  for (std::size_t i = 0; i < tb->agent_taps.size(); ++i) {
    b.agent_traces[scenario.agents[i].node.name] = tb->agent_taps[i]->trace();
  }
  {
    std::ostringstream csv;
    tb->grid.write_csv(csv);
    b.measurements_csv = csv.str();
  }
  b.measurements = tb->grid.samples();
  b.events = tb->log;
  if (tb->mtu) {
    b.transactions = tb->mtu->transactions();
    b.orphans = tb->mtu->orphans();
    for (const auto& r : scenario.rtus) b.mtu_connects[r.node.name] = tb->mtu->connects(r.node.name);
  }
  for (const auto& rtu : tb->rtus) b.rtu_aborts[rtu->config().name] = rtu->aborts();
  if (tb->coordinator) {
    b.actions = tb->coordinator->outcomes();
    b.c2_report = tb->coordinator->report();
    for (const auto& o : b.actions) {
      if (o.outcome != c2::Outcome::Done) {
        b.failures.push_back("action " + std::to_string(o.seq) + " on " + o.agent + ": " + c2::to_string(o.outcome) +
                             (o.reason.empty() ? "" : " (" + o.reason + ")"));
      }
    }
  } else {
    b.c2_report = ordered_json::object();
    b.c2_report["coordinator"] = nullptr;
  }

  ids::DetectorOptions dopts;
  dopts.policy = options.policy;
  b.report = ids::analyze(b.switch_trace, dopts);
  b.run_report = run_report(scenario, *tb, b);

  if (!options.out_root.empty()) {
    const fs::path dir = fs::path(options.out_root) / ("run-" + scenario.name + "-" + std::to_string(scenario.seed));
    fs::create_directories(dir);
    b.dir = dir.string();
    net::write_trace_file((dir / "trace_switch.jsonl").string(), b.switch_trace);
    for (const auto& [name, t] : b.agent_traces) net::write_trace_file((dir / ("trace_" + name + ".jsonl")).string(), t);
    write_file(dir / "scenario.json", to_json(scenario).dump(2) + "\n");
    write_file(dir / "measurements.csv", b.measurements_csv);
    if (tb->mtu) {
      std::ostringstream tx;
      tb->mtu->write_transactions(tx);
      write_file(dir / "transactions.jsonl", tx.str());
    }
    write_file(dir / "events.jsonl", events_jsonl(b.events));
    write_file(dir / "c2_report.json", b.c2_report.dump(2) + "\n");
    write_detection(dir, b.report, options.policy);
    write_file(dir / "run_report.json", b.run_report.dump(2) + "\n");
    export_plotdata(b.dir);
  }
  return b;
}

ids::Report detect(const std::string& trace_path, const std::string& policy_path, const std::string& out_dir) {
  const net::Trace trace = net::read_trace_file(trace_path);
  ids::DetectorOptions opts;
  opts.policy = policy_path.empty() ? ids::default_policy() : ids::load_policy_file(policy_path);
  ids::Report report = ids::analyze(trace, opts);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_detection(out_dir, report, opts.policy);
  }
  return report;
}

}  // namespace fdilab::scenario
