#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdilab/net/frame.hpp"
#include "fdilab/net/network.hpp"

namespace fdilab::net {

struct TraceMeta {
  std::string scenario;
  std::string tap = "switch";
  double start_time = 0.0;
  double compression = 0.0;
};

/// Frames captured at one tap point, plus the identity registry that lets an
/// analyzer tell inventory participants from foreign ones.
struct Trace {
  TraceMeta meta;
  std::vector<EndpointIdentity> registry;
  std::vector<EndpointIdentity> foreign;
  std::vector<Frame> frames;

  [[nodiscard]] bool is_registered_ip(Ipv4Address ip) const;
  [[nodiscard]] const EndpointIdentity* registered_by_ip(Ipv4Address ip) const;
  [[nodiscard]] const EndpointIdentity* registered_by_mac(const MacAddress& mac) const;
};

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collects frames from a tap. Tapping never mutates or delays the frame.
class TraceRecorder {
 public:
  TraceRecorder(Network& net, const TapLocation& location, TraceMeta meta);

  /// Snapshot including the registry as of now.
  [[nodiscard]] Trace trace() const;
  [[nodiscard]] const std::vector<Frame>& frames() const { return frames_; }

 private:
  Network* net_;
  TraceMeta meta_;
  std::vector<Frame> frames_;
};

// JSON-lines: a header line with meta/registry, then one frame per line.
void write_trace(std::ostream& out, const Trace& trace);
std::string trace_to_string(const Trace& trace);
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const Trace& trace);

std::string to_hex(const Bytes& bytes);
Bytes from_hex(std::string_view hex);

}  // namespace fdilab::net
