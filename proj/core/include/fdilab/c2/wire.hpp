#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fdilab::c2 {

using Bytes = std::vector<std::uint8_t>;

enum class MessageType : std::uint8_t { Action, Ack, Status, Heartbeat };

std::string to_string(MessageType t);
std::optional<MessageType> message_type_from_string(const std::string& s);

/// {seq, type, body} carried with a 4-octet big-endian length prefix.
struct Message {
  std::uint64_t seq = 0;
  MessageType type = MessageType::Heartbeat;
  nlohmann::json body = nlohmann::json::object();
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kMaxMessageLength = 1U << 20;

Bytes encode(const Message& m);

/// Splits a C2 byte stream into messages; keeps partial messages between
/// calls. Messages that are not valid JSON envelopes are skipped and
/// counted; an oversized length prefix discards the buffer.
class MessageReassembler {
 public:
  std::vector<Message> feed(std::span<const std::uint8_t> octets);
  void reset() { buffer_.clear(); }
  [[nodiscard]] std::uint64_t errors() const { return errors_; }

 private:
  Bytes buffer_;
  std::uint64_t errors_ = 0;
};

}  // namespace fdilab::c2
