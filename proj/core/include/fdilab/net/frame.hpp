#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdilab/net/address.hpp"
#include "fdilab/net/sim_clock.hpp"

namespace fdilab::net {

using Bytes = std::vector<std::uint8_t>;
using FlowId = std::uint32_t;

enum class PayloadKind : std::uint8_t { Iec104, C2, Other };

std::string to_string(PayloadKind kind);
std::optional<PayloadKind> payload_kind_from_string(std::string_view text);

/// Stream control segments travel as Other frames with a short ASCII payload.
enum class Control : std::uint8_t { Open, Accept, Close };

Bytes control_payload(Control c);
std::optional<Control> parse_control(const Bytes& payload);

struct Frame {
  SimTime timestamp{0};
  Address src;
  Address dst;
  PayloadKind kind = PayloadKind::Other;
  Bytes payload;
  FlowId flow_id = 0;

  [[nodiscard]] FlowKey flow_key() const { return {src.ip, src.port, dst.ip, dst.port}; }
  [[nodiscard]] std::optional<Control> control() const {
    return kind == PayloadKind::Other ? parse_control(payload) : std::nullopt;
  }
};

}  // namespace fdilab::net
