#include "fdilab/ids/detectors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>

#include "fdilab/iec104/codec.hpp"

namespace fdilab::ids {

using iec104::Cot;
using iec104::TypeId;

namespace {

constexpr std::size_t kMaxEvidence = 64;
constexpr double kValueEps = 1e-6;

void add_evidence(Alert& a, std::size_t index) {
  if (a.evidence.size() < kMaxEvidence) a.evidence.push_back(index);
}

std::string endpoint_str(net::Ipv4Address ip, std::uint16_t port) { return ip.str() + ":" + std::to_string(port); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- MacIpInconsistency ------------------------------------------------------

class MacIpObserver final : public Observer {
 public:
  explicit MacIpObserver(const net::Trace& trace) {
    for (const auto& id : trace.registry) registry_.emplace(id.ip, id.mac);
  }

  void on_frame(const FrameView& v) override {
    const auto& f = *v.frame;
    std::string reasons;
    if (auto it = registry_.find(f.src.ip); it != registry_.end() && it->second != f.src.mac) {
      reasons = "registry binds it to " + it->second.str();
    }
    auto [b, inserted] = first_binding_.try_emplace(f.flow_key(), f.src.mac);
    if (!inserted && b->second != f.src.mac) {
      if (!reasons.empty()) reasons += "; ";
      reasons += "flow first bound it to " + b->second.str();
    }
    if (reasons.empty()) return;
    const auto key = std::make_pair(f.flow_id, f.src.mac);
    auto it = open_.find(key);
    if (it == open_.end()) {
      Alert a;
      a.indicator = Indicator::MacIpInconsistency;
      a.t = v.t;
      a.flow_id = f.flow_id;
      a.detail = "src ip " + f.src.ip.str() + " sent with mac " + f.src.mac.str() + ": " + reasons;
      it = open_.emplace(key, Group{std::move(a), 0}).first;
    }
    add_evidence(it->second.alert, v.index);
    ++it->second.frames;
  }

  void finish(Report& r) override {
    for (auto& [key, g] : open_) {
      g.alert.detail += " (" + std::to_string(g.frames) + " frames)";
      r.alerts.push_back(std::move(g.alert));
    }
    open_.clear();
  }

 private:
  struct Group {
    Alert alert;
    std::size_t frames;
  };
  std::map<net::Ipv4Address, net::MacAddress> registry_;
  std::map<net::FlowKey, net::MacAddress> first_binding_;
  std::map<std::pair<net::FlowId, net::MacAddress>, Group> open_;
};

// ---- NewParticipant ----------------------------------------------------------

class NewParticipantObserver final : public Observer {
 public:
  explicit NewParticipantObserver(std::vector<net::Ipv4Address> known) : known_(known.begin(), known.end()) {}

  void on_frame(const FrameView& v) override {
    if (known_.empty()) return;
    const auto& f = *v.frame;
    see(f.src.ip, v);
    if (f.dst.ip != f.src.ip) see(f.dst.ip, v);
  }

  void finish(Report& r) override {
    if (known_.empty()) {
      r.warnings.emplace_back("no known participants; new-participant check skipped");
      return;
    }
    for (auto& [ip, s] : seen_) {
      std::string flows;
      for (auto id : s.flows) flows += (flows.empty() ? "" : ",") + std::to_string(id);
      s.alert.detail = "ip " + ip.str() + " is not in the inventory; flows " + flows;
      r.alerts.push_back(std::move(s.alert));
    }
    seen_.clear();
  }

 private:
  struct Seen {
    Alert alert;
    std::set<net::FlowId> flows;
  };

  void see(net::Ipv4Address ip, const FrameView& v) {
    if (known_.count(ip) != 0) return;
    auto it = seen_.find(ip);
    if (it == seen_.end()) {
      Seen s;
      s.alert.indicator = Indicator::NewParticipant;
      s.alert.t = v.t;
      s.alert.flow_id = v.frame->flow_id;
      it = seen_.emplace(ip, std::move(s)).first;
    }
    if (it->second.flows.insert(v.frame->flow_id).second) add_evidence(it->second.alert, v.index);
  }

  std::set<net::Ipv4Address> known_;
  std::map<net::Ipv4Address, Seen> seen_;
};

// ---- RttOutlier --------------------------------------------------------------

class RttObserver final : public Observer {
 public:
  RttObserver(double k_mad, std::size_t min_samples, double mad_floor_ms)
      : k_mad_(k_mad), min_samples_(min_samples), mad_floor_ms_(mad_floor_ms) {}

  void on_frame(const FrameView& v) override {
    if (!v.connection) return;
    if (v.control == net::Control::Open) {
      pending_.erase({*v.connection, false});
      pending_.erase({*v.connection, true});
      return;
    }
    for (const auto& apdu : v.apdus) {
      if (apdu.is_i() || apdu.is_s()) {
        auto& q = pending_[{*v.connection, !v.from_server}];
        while (!q.empty() && iec104::seq_diff(q.front().tx, apdu.apci.rx) >= 1) {
          const auto& p = q.front();
          samples_.push_back({{p.index, p.t, p.flow, net::to_seconds(v.frame->timestamp - p.ts) * 1e3, false}, v.index});
          q.pop_front();
        }
      }
      if (apdu.is_i()) {
        auto& q = pending_[{*v.connection, v.from_server}];
        if (q.size() >= iec104::kSeqModulus / 2) q.pop_front();
        q.push_back({apdu.apci.tx, v.index, v.t, v.frame->timestamp, v.frame->flow_id});
      }
    }
  }

  void finish(Report& r) override {
    std::map<net::FlowId, std::vector<std::size_t>> by_flow;
    for (std::size_t i = 0; i < samples_.size(); ++i) by_flow[samples_[i].sample.flow_id].push_back(i);
    for (const auto& [flow, idx] : by_flow) {
      RttFlowSummary s;
      s.flow_id = flow;
      s.samples = idx.size();
      std::vector<double> values;
      values.reserve(idx.size());
      for (auto i : idx) values.push_back(samples_[i].sample.rtt_ms);
      s.median_ms = median(values);
      s.mad_ms = median_absolute_deviation(values);
      s.threshold_ms = s.median_ms + k_mad_ * std::max(s.mad_ms, mad_floor_ms_);
      s.too_short = idx.size() < min_samples_;
      if (!s.too_short) {
        for (auto i : idx) {
          auto& smp = samples_[i].sample;
          if (smp.rtt_ms <= s.threshold_ms) continue;
          smp.outlier = true;
          ++s.outliers;
          Alert a;
          a.indicator = Indicator::RttOutlier;
          a.t = smp.t;
          a.flow_id = flow;
          a.evidence = {smp.frame_index, samples_[i].ack_index};
          a.detail = "rtt " + fixed(smp.rtt_ms, 3) + " ms above threshold " + fixed(s.threshold_ms, 3) + " ms (median " +
                     fixed(s.median_ms, 3) + ", MAD " + fixed(s.mad_ms, 3) + ")";
          r.alerts.push_back(std::move(a));
        }
      }
      r.rtt_flows.push_back(s);
    }
    for (const auto& s : samples_) r.rtt.push_back(s.sample);
    std::stable_sort(r.rtt.begin(), r.rtt.end(),
                     [](const RttSample& a, const RttSample& b) { return a.frame_index < b.frame_index; });
    samples_.clear();
  }

 private:
  struct Pending {
    std::uint16_t tx;
    std::size_t index;
    double t;
    net::SimTime ts;
    net::FlowId flow;
  };
  struct Sample {
    RttSample sample;
    std::size_t ack_index;
  };

  double k_mad_;
  std::size_t min_samples_;
  double mad_floor_ms_;
  // Keyed by (connection, sender is server).
  std::map<std::pair<Connection, bool>, std::deque<Pending>> pending_;
  std::vector<Sample> samples_;
};

// ---- FlowAnomaly -------------------------------------------------------------

class FlowAnomalyObserver final : public Observer {
 public:
  explicit FlowAnomalyObserver(double timeout) : timeout_(timeout) {}

  void on_frame(const FrameView& v) override {
    expire(v.t);
    if (!v.connection) return;
    for (const auto& apdu : v.apdus) {
      const auto* asdu = apdu.asdu();
      if (asdu == nullptr || !apdu.is_i()) continue;
      if (asdu->type_id != TypeId::C_SE_NC_1 && asdu->type_id != TypeId::C_IC_NA_1) continue;
      for (const auto& obj : asdu->objects) {
        const Key key{v.connection->server_ip, asdu->common_address, static_cast<std::uint8_t>(asdu->type_id), obj.ioa};
        if (!v.from_server) {
          if (asdu->cot == Cot::Activation) open_[key].push_back({v.index, v.t, v.frame->flow_id, false});
        } else if (asdu->cot == Cot::ActivationCon) {
          on_confirm(key, *asdu, v);
        } else if (asdu->cot == Cot::ActivationTerm) {
          on_terminate(key, v);
        }
      }
    }
  }

  void finish(Report& r) override {
    for (auto& a : alerts_) r.alerts.push_back(std::move(a));
    alerts_.clear();
  }

 private:
  using Key = std::tuple<net::Ipv4Address, std::uint16_t, std::uint8_t, std::uint32_t>;
  struct Activation {
    std::size_t index;
    double t;
    net::FlowId flow;
    bool confirmed;
  };

  static std::string describe(const Key& k) {
    return iec104::to_string(static_cast<TypeId>(std::get<2>(k))) + " CA " + std::to_string(std::get<1>(k)) + " IOA " +
           std::to_string(std::get<3>(k)) + " at " + std::get<0>(k).str();
  }

  void on_confirm(const Key& key, const iec104::Asdu& asdu, const FrameView& v) {
    auto& q = open_[key];
    auto it = std::find_if(q.begin(), q.end(), [](const Activation& a) { return !a.confirmed; });
    if (it != q.end()) {
      if (asdu.negative_confirm) {
        q.erase(it);
      } else {
        it->confirmed = true;
      }
      return;
    }
    Alert a;
    a.indicator = Indicator::FlowAnomaly;
    a.t = v.t;
    a.flow_id = v.frame->flow_id;
    a.evidence = {v.index};
    a.detail = std::string(asdu.negative_confirm ? "negative " : "") + "ActCon without open activation for " + describe(key);
    alerts_.push_back(std::move(a));
    if (!asdu.negative_confirm) orphan_[key] = alerts_.size() - 1;
  }

  void on_terminate(const Key& key, const FrameView& v) {
    auto& q = open_[key];
    auto it = std::find_if(q.begin(), q.end(), [](const Activation& a) { return a.confirmed; });
    if (it != q.end()) {
      q.erase(it);
      return;
    }
    if (auto o = orphan_.find(key); o != orphan_.end()) {
      auto& a = alerts_[o->second];
      add_evidence(a, v.index);
      a.detail += ", followed by ActTerm";
      orphan_.erase(o);
      return;
    }
    Alert a;
    a.indicator = Indicator::FlowAnomaly;
    a.t = v.t;
    a.flow_id = v.frame->flow_id;
    a.evidence = {v.index};
    a.detail = "ActTerm without open activation for " + describe(key);
    alerts_.push_back(std::move(a));
  }

  void expire(double now) {
    for (auto& [key, q] : open_) {
      for (auto it = q.begin(); it != q.end();) {
        if (!it->confirmed && now - it->t > timeout_) {
          Alert a;
          a.indicator = Indicator::FlowAnomaly;
          a.t = it->t + timeout_;
          a.flow_id = it->flow;
          a.evidence = {it->index};
          a.detail = "activation not confirmed within " + fixed(timeout_, 1) + " s for " + describe(key);
          alerts_.push_back(std::move(a));
          it = q.erase(it);
        } else {
          ++it;
        }
      }
    }
  }

  double timeout_;
  std::map<Key, std::deque<Activation>> open_;
  std::map<Key, std::size_t> orphan_;  // orphan ActCon alerts waiting for their ActTerm
  std::vector<Alert> alerts_;
};

// ---- SeqInconsistency --------------------------------------------------------

class SeqObserver final : public Observer {
 public:
  void on_frame(const FrameView& v) override {
    if (!v.connection) return;
    if (v.control == net::Control::Open && !v.from_server) {
      auto& sides = conns_[*v.connection];
      for (auto& s : sides) s = Side{true, 0, 0, 0};
      return;
    }
    for (const auto& apdu : v.apdus) {
      auto& sides = conns_[*v.connection];
      if (apdu.is_i() || apdu.is_s()) {
        // rx acknowledges the I-frames counted for the other side.
        Side& peer = sides[v.from_server ? 0 : 1];
        if (peer.base_known) {
          const auto expected = iec104::seq_add(peer.base, static_cast<int>(peer.count % iec104::kSeqModulus));
          const int ahead = iec104::seq_diff(expected, apdu.apci.rx);
          if (ahead > peer.max_excess) {
            peer.max_excess = ahead;
            const auto& f = *v.frame;
            Alert a;
            a.indicator = Indicator::SeqInconsistency;
            a.t = v.t;
            a.flow_id = f.flow_id;
            a.evidence = {v.index};
            a.detail = "rx " + std::to_string(apdu.apci.rx) + " from " + endpoint_str(f.src.ip, f.src.port) +
                       " acknowledges " + std::to_string(ahead) + " I-frame(s) more than observed from " +
                       endpoint_str(f.dst.ip, f.dst.port) + " (" + std::to_string(peer.count) + " observed)";
            alerts_.push_back(std::move(a));
          }
        }
      }
      if (apdu.is_i()) {
        Side& self = sides[v.from_server ? 1 : 0];
        if (!self.base_known) self = Side{true, apdu.apci.tx, 0, 0};
        ++self.count;
      }
    }
  }

  void finish(Report& r) override {
    for (auto& a : alerts_) r.alerts.push_back(std::move(a));
    alerts_.clear();
  }

 private:
  struct Side {
    bool base_known = false;
    std::uint16_t base = 0;
    std::uint64_t count = 0;
    int max_excess = 0;
  };
  // [0] counts client I-frames, [1] server I-frames.
  std::map<Connection, std::array<Side, 2>> conns_;
  std::vector<Alert> alerts_;
};

// ---- ProcessImplausible ------------------------------------------------------

class ProcessObserver final : public Observer {
 public:
  explicit ProcessObserver(Policy policy) : policy_(std::move(policy)) {}

  void on_frame(const FrameView& v) override {
    if (!v.connection) return;
    for (const auto& apdu : v.apdus) {
      const auto* asdu = apdu.asdu();
      if (asdu == nullptr || !apdu.is_i() || asdu->type_id != TypeId::C_SE_NC_1 || asdu->negative_confirm) continue;
      for (const auto& obj : asdu->objects) {
        const auto key = std::make_tuple(v.connection->server_ip, asdu->common_address, obj.ioa);
        if (!v.from_server && asdu->cot == Cot::Activation) {
          check(asdu->common_address, obj.ioa, obj.value, v, "commanded");
          activations_[key].push_back(obj.value);
        } else if (v.from_server && asdu->cot == Cot::ActivationCon) {
          auto& q = activations_[key];
          if (q.empty()) {
            check(asdu->common_address, obj.ioa, obj.value, v, "confirmed without observed activation");
            continue;
          }
          const float commanded = q.front();
          q.pop_front();
          if (!(iec104::InformationObject{0, commanded} == iec104::InformationObject{0, obj.value})) {
            check(asdu->common_address, obj.ioa, obj.value, v, "confirmed differing from activation");
          }
        }
      }
    }
  }

  void finish(Report& r) override {
    for (auto& a : alerts_) r.alerts.push_back(std::move(a));
    for (auto& w : warnings_) r.warnings.push_back(std::move(w));
    alerts_.clear();
    warnings_.clear();
  }

 private:
  void check(std::uint16_t ca, std::uint32_t ioa, double value, const FrameView& v, const std::string& how) {
    const auto* e = policy_.find(ca, ioa);
    if (e == nullptr) {
      if (warned_.insert({ca, ioa}).second) {
        warnings_.push_back("no policy for CA " + std::to_string(ca) + " IOA " + std::to_string(ioa) + "; ignored");
      }
      return;
    }
    std::string reasons;
    if (!std::isfinite(value) || value < e->min - kValueEps || value > e->max + kValueEps) {
      reasons = "outside [" + fixed(e->min, 4) + ", " + fixed(e->max, 4) + "]";
    }
    auto last = last_.find({ca, ioa});
    if (last != last_.end() && std::fabs(value - last->second) > e->max_step + kValueEps) {
      if (!reasons.empty()) reasons += "; ";
      reasons += "step " + fixed(std::fabs(value - last->second), 4) + " from " + fixed(last->second, 4) +
                 " exceeds " + fixed(e->max_step, 4);
    }
    last_[{ca, ioa}] = value;
    if (reasons.empty()) return;
    Alert a;
    a.indicator = Indicator::ProcessImplausible;
    a.t = v.t;
    a.flow_id = v.frame->flow_id;
    a.evidence = {v.index};
    a.detail = "set-point " + fixed(value, 4) + " for CA " + std::to_string(ca) + " IOA " + std::to_string(ioa) + " " +
               how + ": " + reasons;
    alerts_.push_back(std::move(a));
  }

  Policy policy_;
  std::map<std::tuple<net::Ipv4Address, std::uint16_t, std::uint32_t>, std::deque<float>> activations_;
  std::map<std::pair<std::uint16_t, std::uint32_t>, double> last_;
  std::set<std::pair<std::uint16_t, std::uint32_t>> warned_;
  std::vector<Alert> alerts_;
  std::vector<std::string> warnings_;
};

std::vector<net::Ipv4Address> registry_ips(const net::Trace& trace) {
  std::vector<net::Ipv4Address> ips;
  for (const auto& id : trace.registry) ips.push_back(id.ip);
  return ips;
}

}  // namespace

std::size_t Report::count(Indicator i) const {
  return static_cast<std::size_t>(
      std::count_if(alerts.begin(), alerts.end(), [i](const Alert& a) { return a.indicator == i; }));
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_absolute_deviation(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::fabs(v - m));
  return median(std::move(dev));
}

std::unique_ptr<Observer> make_observer(Indicator indicator, const net::Trace& trace, const DetectorOptions& opts) {
  switch (indicator) {
    case Indicator::MacIpInconsistency: return std::make_unique<MacIpObserver>(trace);
    case Indicator::NewParticipant:
      return std::make_unique<NewParticipantObserver>(opts.known.empty() ? registry_ips(trace) : opts.known);
    case Indicator::RttOutlier: return std::make_unique<RttObserver>(opts.k_mad, opts.rtt_min_samples, opts.mad_floor_ms);
    case Indicator::FlowAnomaly: return std::make_unique<FlowAnomalyObserver>(opts.confirm_timeout);
    case Indicator::SeqInconsistency: return std::make_unique<SeqObserver>();
    case Indicator::ProcessImplausible: return std::make_unique<ProcessObserver>(opts.policy);
  }
  throw std::invalid_argument("unknown indicator");
}

Report run_observers(const net::Trace& trace, std::vector<std::unique_ptr<Observer>>& observers) {
  Report report;
  report.frames = trace.frames.size();
  std::map<net::FlowKey, iec104::StreamReassembler> streams;
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const auto& f = trace.frames[i];
    FrameView v;
    v.index = i;
    v.frame = &f;
    v.t = net::to_seconds(f.timestamp);
    v.control = f.control();
    if (f.dst.port == iec104::kDefaultPort) {
      v.connection = Connection{f.src.ip, f.src.port, f.dst.ip, f.dst.port};
      v.from_server = false;
    } else if (f.src.port == iec104::kDefaultPort) {
      v.connection = Connection{f.dst.ip, f.dst.port, f.src.ip, f.src.port};
      v.from_server = true;
    }
    if (v.connection && v.control == net::Control::Open) {
      streams.erase(f.flow_key());
      streams.erase(f.flow_key().reversed());
    }
    if (v.connection && f.kind == net::PayloadKind::Iec104) {
      for (auto& item : streams[f.flow_key()].feed(f.payload)) {
        if (item.status == iec104::DecodeStatus::Ok) v.apdus.push_back(std::move(item.apdu));
      }
    }
    for (auto& o : observers) o->on_frame(v);
  }
  for (auto& o : observers) o->finish(report);
  sort_alerts(report.alerts);
  return report;
}

Report analyze(const net::Trace& trace, const DetectorOptions& opts) {
  std::vector<std::unique_ptr<Observer>> observers;
  for (auto i : kAllIndicators) observers.push_back(make_observer(i, trace, opts));
  return run_observers(trace, observers);
}

Report analyze_one(const net::Trace& trace, Indicator indicator, const DetectorOptions& opts) {
  std::vector<std::unique_ptr<Observer>> observers;
  observers.push_back(make_observer(indicator, trace, opts));
  return run_observers(trace, observers);
}

std::vector<Alert> detect_mac_ip(const net::Trace& trace) {
  return analyze_one(trace, Indicator::MacIpInconsistency).alerts;
}

std::vector<Alert> detect_new_participant(const net::Trace& trace, const std::vector<net::Ipv4Address>& known) {
  if (known.empty()) throw std::invalid_argument("known participant list is empty");
  DetectorOptions opts;
  opts.known = known;
  return analyze_one(trace, Indicator::NewParticipant, opts).alerts;
}

std::vector<Alert> detect_rtt_outliers(const net::Trace& trace, double k_mad) {
  DetectorOptions opts;
  opts.k_mad = k_mad;
  return analyze_one(trace, Indicator::RttOutlier, opts).alerts;
}

std::vector<Alert> detect_flow_anomaly(const net::Trace& trace) {
  return analyze_one(trace, Indicator::FlowAnomaly).alerts;
}

std::vector<Alert> detect_seq_inconsistency(const net::Trace& trace) {
  return analyze_one(trace, Indicator::SeqInconsistency).alerts;
}

std::vector<Alert> detect_process_implausible(const net::Trace& trace, const Policy& policy) {
  DetectorOptions opts;
  opts.policy = policy;
  return analyze_one(trace, Indicator::ProcessImplausible, opts).alerts;
}

void write_alerts(std::ostream& out, const std::vector<Alert>& alerts) {
  for (const auto& a : alerts) out << to_json(a).dump() << '\n';
}

std::vector<Alert> read_alerts(std::istream& in) {
  std::vector<Alert> alerts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    alerts.push_back(alert_from_json(nlohmann::json::parse(line)));
  }
  return alerts;
}

nlohmann::ordered_json summary_json(const Report& report) {
  nlohmann::ordered_json j;
  j["frames"] = report.frames;
  nlohmann::ordered_json counts;
  for (auto i : kAllIndicators) counts[to_string(i)] = report.count(i);
  j["counts"] = counts;
  j["alerts"] = report.alerts.size();
  auto flows = nlohmann::ordered_json::array();
  for (const auto& s : report.rtt_flows) {
    nlohmann::ordered_json f;
    f["flow_id"] = s.flow_id;
    f["samples"] = s.samples;
    f["median_ms"] = s.median_ms;
    f["mad_ms"] = s.mad_ms;
    f["threshold_ms"] = s.threshold_ms;
    f["outliers"] = s.outliers;
    f["verdict"] = s.too_short ? "FlowTooShort" : "ok";
    flows.push_back(f);
  }
  j["rtt_flows"] = flows;
  j["warnings"] = report.warnings;
  return j;
}

void write_rtt_csv(std::ostream& out, const Report& report) {
  out << "frame_index,t,flow_id,rtt_ms,outlier\n";
  for (const auto& s : report.rtt) {
    out << s.frame_index << ',' << fixed(s.t, 9) << ',' << s.flow_id << ',' << fixed(s.rtt_ms, 6) << ','
        << (s.outlier ? 1 : 0) << '\n';
  }
}

}  // namespace fdilab::ids
