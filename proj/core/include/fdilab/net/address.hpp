#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace fdilab::net {

struct MacAddress {
  std::array<std::uint8_t, 6> octets{};

  friend auto operator<=>(const MacAddress&, const MacAddress&) = default;

  [[nodiscard]] std::string str() const;
  static std::optional<MacAddress> parse(std::string_view text);
};

struct Ipv4Address {
  std::uint32_t value = 0;

  friend auto operator<=>(const Ipv4Address&, const Ipv4Address&) = default;

  [[nodiscard]] std::string str() const;
  static std::optional<Ipv4Address> parse(std::string_view text);
};

/// A registered network participant. `port` is its listening port (servers)
/// or base ephemeral port (clients).
struct EndpointIdentity {
  std::string name;
  MacAddress mac;
  Ipv4Address ip;
  std::uint16_t port = 0;

  friend bool operator==(const EndpointIdentity&, const EndpointIdentity&) = default;
};

/// The on-wire identity stamped on a frame: L2, L3 and L4 source or
/// destination.
struct Address {
  MacAddress mac;
  Ipv4Address ip;
  std::uint16_t port = 0;

  friend auto operator<=>(const Address&, const Address&) = default;
};

/// Ordered (src ip, src port, dst ip, dst port) tuple.
struct FlowKey {
  Ipv4Address src_ip;
  std::uint16_t src_port = 0;
  Ipv4Address dst_ip;
  std::uint16_t dst_port = 0;

  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
  [[nodiscard]] FlowKey reversed() const { return {dst_ip, dst_port, src_ip, src_port}; }
};

}  // namespace fdilab::net
