#include "fdilab/ids/alert.hpp"

#include <algorithm>
#include <tuple>

namespace fdilab::ids {

std::string to_string(Indicator i) {
  switch (i) {
    case Indicator::MacIpInconsistency: return "MacIpInconsistency";
    case Indicator::NewParticipant: return "NewParticipant";
    case Indicator::RttOutlier: return "RttOutlier";
    case Indicator::FlowAnomaly: return "FlowAnomaly";
    case Indicator::SeqInconsistency: return "SeqInconsistency";
    case Indicator::ProcessImplausible: return "ProcessImplausible";
  }
  return "FlowAnomaly";
}

std::optional<Indicator> indicator_from_string(std::string_view text) {
  for (auto i : kAllIndicators) {
    if (to_string(i) == text) return i;
  }
  return std::nullopt;
}

nlohmann::ordered_json to_json(const Alert& a) {
  nlohmann::ordered_json j;
  j["indicator"] = to_string(a.indicator);
  j["t"] = a.t;
  j["flow_id"] = a.flow_id;
  j["evidence"] = a.evidence;
  j["detail"] = a.detail;
  return j;
}

Alert alert_from_json(const nlohmann::json& j) {
  Alert a;
  const auto ind = indicator_from_string(j.at("indicator").get<std::string>());
  if (!ind) throw std::invalid_argument("unknown indicator " + j.at("indicator").get<std::string>());
  a.indicator = *ind;
  a.t = j.at("t").get<double>();
  a.flow_id = j.at("flow_id").get<net::FlowId>();
  a.evidence = j.at("evidence").get<std::vector<std::size_t>>();
  a.detail = j.value("detail", std::string());
  return a;
}

void sort_alerts(std::vector<Alert>& alerts) {
  std::stable_sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
    return std::tie(a.t, a.indicator, a.flow_id, a.evidence, a.detail) <
           std::tie(b.t, b.indicator, b.flow_id, b.evidence, b.detail);
  });
}

}  // namespace fdilab::ids
