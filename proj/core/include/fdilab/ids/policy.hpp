#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fdilab::ids {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operating envelope of one set-point.
struct PolicyEntry {
  std::uint16_t ca = 0;
  std::uint32_t ioa = 0;
  double min = 0.0;
  double max = 0.0;
  double max_step = 0.0;

  friend bool operator==(const PolicyEntry&, const PolicyEntry&) = default;
};

struct Policy {
  std::vector<PolicyEntry> entries;

  [[nodiscard]] const PolicyEntry* find(std::uint16_t ca, std::uint32_t ioa) const;
  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Curtailment windows for the lab feeder: PVI2 in [0, 0.5], BSSI in [-1, 1]
/// with steps of at most 0.5, PVI1 unrestricted.
Policy default_policy();

nlohmann::ordered_json to_json(const Policy& p);
/// Throws PolicyError naming the offending field, e.g. "entries[1].max".
Policy policy_from_json(const nlohmann::json& j);
Policy load_policy_file(const std::string& path);
void write_policy_file(const std::string& path, const Policy& p);

}  // namespace fdilab::ids
