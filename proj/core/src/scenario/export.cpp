#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fdilab/iec104/codec.hpp"
#include "fdilab/scenario/scenario.hpp"

namespace fdilab::scenario {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

// Long (time, name, quantity, value) rows to one column per series.
std::string pivot_measurements(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line != "time_s,name,quantity,value") throw MissingArtifact("measurements.csv: unexpected header");
  std::vector<std::string> columns;
  std::map<std::string, std::size_t> column_of;
  std::vector<std::pair<std::string, std::map<std::size_t, std::string>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw MissingArtifact("measurements.csv: malformed row");
    const std::string series = cells[1] + "_" + cells[2];
    auto [it, inserted] = column_of.try_emplace(series, columns.size());
    if (inserted) columns.push_back(series);
    if (rows.empty() || rows.back().first != cells[0]) rows.push_back({cells[0], {}});
    rows.back().second[it->second] = cells[3];
  }
  std::ostringstream out;
  out << "time_s";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (const auto& [t, values] : rows) {
    out << t;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << ',';
      if (auto v = values.find(c); v != values.end()) out << v->second;
    }
    out << '\n';
  }
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path.string());
  out << content;
}

}  // namespace

std::string txrx_csv(const net::Trace& trace) {
  std::ostringstream out;
  out << "frame_index,t,flow_id,src_ip,dst_ip,frame_kind,tx,rx\n";
  std::map<net::FlowKey, iec104::StreamReassembler> streams;
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const auto& f = trace.frames[i];
    const bool iec = f.src.port == iec104::kDefaultPort || f.dst.port == iec104::kDefaultPort;
    if (!iec) continue;
    if (f.control() == net::Control::Open) {
      streams.erase(f.flow_key());
      streams.erase(f.flow_key().reversed());
      continue;
    }
    if (f.kind != net::PayloadKind::Iec104) continue;
    for (const auto& item : streams[f.flow_key()].feed(f.payload)) {
      if (item.status != iec104::DecodeStatus::Ok || item.apdu.is_u()) continue;
      out << i << ',' << fixed(net::to_seconds(f.timestamp), 9) << ',' << f.flow_id << ',' << f.src.ip.str() << ','
          << f.dst.ip.str() << ',' << iec104::to_string(item.apdu.apci.kind) << ',';
      if (item.apdu.is_i()) out << item.apdu.apci.tx;
      out << ',' << item.apdu.apci.rx << '\n';
    }
  }
  return out.str();
}

std::vector<std::string> export_plotdata(const std::string& bundle_dir) {
  const fs::path dir(bundle_dir);
  const fs::path measurements = dir / "measurements.csv";
  const fs::path trace_path = dir / "trace_switch.jsonl";
  for (const auto& p : {measurements, trace_path}) {
    if (!fs::exists(p)) throw MissingArtifact("missing artifact " + p.string());
  }
  std::ifstream min(measurements);
  const std::string wide = pivot_measurements(min);
  const net::Trace trace = net::read_trace_file(trace_path.string());

  ids::DetectorOptions opts;
  const auto report = ids::analyze_one(trace, ids::Indicator::RttOutlier, opts);
  std::ostringstream rtt;
  rtt << "frame_index,t,flow_id,src_ip,dst_ip,rtt_ms,outlier\n";
  for (const auto& s : report.rtt) {
    const auto& f = trace.frames.at(s.frame_index);
    rtt << s.frame_index << ',' << fixed(s.t, 9) << ',' << s.flow_id << ',' << f.src.ip.str() << ',' << f.dst.ip.str()
        << ',' << fixed(s.rtt_ms, 6) << ',' << (s.outlier ? 1 : 0) << '\n';
  }

  const std::vector<std::string> paths = {(dir / "plot_measurements.csv").string(), (dir / "plot_rtt.csv").string(),
                                          (dir / "plot_txrx.csv").string()};
  write_file(paths[0], wide);
  write_file(paths[1], rtt.str());
  write_file(paths[2], txrx_csv(trace));
  return paths;
}

}  // namespace fdilab::scenario
