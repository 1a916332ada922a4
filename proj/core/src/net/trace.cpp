#include "fdilab/net/trace.hpp"

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

namespace fdilab::net {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json identity_json(const EndpointIdentity& id) {
  ordered_json j;
  j["name"] = id.name;
  j["mac"] = id.mac.str();
  j["ip"] = id.ip.str();
  j["port"] = id.port;
  return j;
}

MacAddress mac_field(const nlohmann::json& j, const char* key) {
  auto mac = MacAddress::parse(j.at(key).get<std::string>());
  if (!mac) throw TraceFormatError(std::string("bad mac in field ") + key);
  return *mac;
}

Ipv4Address ip_field(const nlohmann::json& j, const char* key) {
  auto ip = Ipv4Address::parse(j.at(key).get<std::string>());
  if (!ip) throw TraceFormatError(std::string("bad ip in field ") + key);
  return *ip;
}

EndpointIdentity identity_from_json(const nlohmann::json& j) {
  EndpointIdentity id;
  id.name = j.at("name").get<std::string>();
  id.mac = mac_field(j, "mac");
  id.ip = ip_field(j, "ip");
  id.port = j.at("port").get<std::uint16_t>();
  return id;
}

}  // namespace

bool Trace::is_registered_ip(Ipv4Address ip) const { return registered_by_ip(ip) != nullptr; }

const EndpointIdentity* Trace::registered_by_ip(Ipv4Address ip) const {
  for (const auto& id : registry) {
    if (id.ip == ip) return &id;
  }
  return nullptr;
}

const EndpointIdentity* Trace::registered_by_mac(const MacAddress& mac) const {
  for (const auto& id : registry) {
    if (id.mac == mac) return &id;
  }
  return nullptr;
}

TraceRecorder::TraceRecorder(Network& net, const TapLocation& location, TraceMeta meta)
    : net_(&net), meta_(std::move(meta)) {
  net.add_tap(location, [this](const Frame& f) { frames_.push_back(f); });
}

Trace TraceRecorder::trace() const {
  Trace t;
  t.meta = meta_;
  t.registry = net_->registry();
  t.foreign = net_->foreign();
  t.frames = frames_;
  return t;
}

std::string to_hex(const Bytes& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0F]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw TraceFormatError("odd-length hex payload");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw TraceFormatError("non-hex character in payload");
  };
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  }
  return out;
}

void write_trace(std::ostream& out, const Trace& trace) {
  ordered_json header;
  header["type"] = "header";
  header["meta"] = {{"scenario", trace.meta.scenario},
                    {"tap", trace.meta.tap},
                    {"start_time", trace.meta.start_time},
                    {"compression", trace.meta.compression}};
  header["registry"] = ordered_json::array();
  for (const auto& id : trace.registry) header["registry"].push_back(identity_json(id));
  header["foreign"] = ordered_json::array();
  for (const auto& id : trace.foreign) header["foreign"].push_back(identity_json(id));
  out << header.dump() << '\n';
  for (const auto& f : trace.frames) {
    ordered_json j;
    j["ts"] = to_seconds(f.timestamp);
    j["src_mac"] = f.src.mac.str();
    j["src_ip"] = f.src.ip.str();
    j["src_port"] = f.src.port;
    j["dst_mac"] = f.dst.mac.str();
    j["dst_ip"] = f.dst.ip.str();
    j["dst_port"] = f.dst.port;
    j["kind"] = to_string(f.kind);
    j["payload_hex"] = to_hex(f.payload);
    j["flow_id"] = f.flow_id;
    out << j.dump() << '\n';
  }
}

std::string trace_to_string(const Trace& trace) {
  std::ostringstream os;
  write_trace(os, trace);
  return os.str();
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw TraceFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("type", "") != "header") throw TraceFormatError("first line must be the header");
        const auto& meta = j.at("meta");
        trace.meta.scenario = meta.value("scenario", "");
        trace.meta.tap = meta.value("tap", "switch");
        trace.meta.start_time = meta.value("start_time", 0.0);
        trace.meta.compression = meta.value("compression", 0.0);
        for (const auto& id : j.at("registry")) trace.registry.push_back(identity_from_json(id));
        if (j.contains("foreign")) {
          for (const auto& id : j.at("foreign")) trace.foreign.push_back(identity_from_json(id));
        }
        have_header = true;
        continue;
      }
      Frame f;
      f.timestamp = from_seconds(j.at("ts").get<double>());
      f.src = {mac_field(j, "src_mac"), ip_field(j, "src_ip"), j.at("src_port").get<std::uint16_t>()};
      f.dst = {mac_field(j, "dst_mac"), ip_field(j, "dst_ip"), j.at("dst_port").get<std::uint16_t>()};
      auto kind = payload_kind_from_string(j.at("kind").get<std::string>());
      if (!kind) throw TraceFormatError("unknown payload kind");
      f.kind = *kind;
      f.payload = from_hex(j.at("payload_hex").get<std::string>());
      f.flow_id = j.at("flow_id").get<FlowId>();
      trace.frames.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw TraceFormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const TraceFormatError& e) {
      throw TraceFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  // A file with no lines at all is an empty capture.
  return trace;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceFormatError("cannot open trace file " + path);
  return read_trace(in);
}

void write_trace_file(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw TraceFormatError("cannot write trace file " + path);
  write_trace(out, trace);
}

}  // namespace fdilab::net
