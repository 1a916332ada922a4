#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "fdilab/iec104/apdu.hpp"

namespace fdilab::mitm {

enum class Direction : std::uint8_t { ToRtu, ToMtu };
enum class ActionKind : std::uint8_t { Inject, Modify, Drop, Collect, Passthrough };

std::string to_string(Direction d);
std::string to_string(ActionKind k);

/// Selects ASDUs; unset fields match anything.
struct Match {
  std::optional<iec104::TypeId> type_id;
  std::optional<std::uint16_t> common_address;
  std::optional<std::uint32_t> ioa;
  std::optional<std::uint8_t> cot;

  [[nodiscard]] bool matches(const iec104::Asdu& asdu) const;
  friend bool operator==(const Match&, const Match&) = default;
};

struct Forge {
  iec104::TypeId type_id = iec104::TypeId::C_SE_NC_1;
  iec104::Cot cot = iec104::Cot::Activation;
  std::uint16_t common_address = 1;
  std::uint32_t ioa = 0;
  float value = 0.0F;

  [[nodiscard]] iec104::Asdu asdu() const;
  friend bool operator==(const Forge&, const Forge&) = default;
};

/// value' = value * scale + offset
struct Rewrite {
  double scale = 1.0;
  double offset = 0.0;
  friend bool operator==(const Rewrite&, const Rewrite&) = default;
};

struct Action {
  ActionKind kind = ActionKind::Passthrough;
  Direction direction = Direction::ToRtu;
  std::optional<Match> match;
  std::optional<Forge> forge;
  Rewrite rewrite;
  double at_time = 0.0;
  // Modify/Drop/Collect stay active until this time (open-ended if unset).
  std::optional<double> until;

  /// Throws InvalidAction: Inject needs forge, Modify/Drop need match.
  void validate() const;
  friend bool operator==(const Action&, const Action&) = default;
};

class InvalidAction : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

nlohmann::json to_json(const Action& a);
/// Throws InvalidAction naming the offending field.
Action action_from_json(const nlohmann::json& j);

}  // namespace fdilab::mitm
