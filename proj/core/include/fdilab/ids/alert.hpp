#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdilab/net/frame.hpp"

namespace fdilab::ids {

enum class Indicator : std::uint8_t {
  MacIpInconsistency,
  NewParticipant,
  RttOutlier,
  FlowAnomaly,
  SeqInconsistency,
  ProcessImplausible,
};

inline constexpr Indicator kAllIndicators[] = {
    Indicator::MacIpInconsistency, Indicator::NewParticipant,   Indicator::RttOutlier,
    Indicator::FlowAnomaly,        Indicator::SeqInconsistency, Indicator::ProcessImplausible,
};

std::string to_string(Indicator i);
std::optional<Indicator> indicator_from_string(std::string_view text);

struct Alert {
  Indicator indicator = Indicator::FlowAnomaly;
  double t = 0.0;  // experiment seconds
  net::FlowId flow_id = 0;
  std::vector<std::size_t> evidence;  // frame indices into the trace
  std::string detail;

  friend bool operator==(const Alert&, const Alert&) = default;
};

nlohmann::ordered_json to_json(const Alert& a);
Alert alert_from_json(const nlohmann::json& j);

/// Orders by (t, indicator, flow_id), then evidence and detail.
void sort_alerts(std::vector<Alert>& alerts);

}  // namespace fdilab::ids
