#include "fdilab/c2/wire.hpp"

namespace fdilab::c2 {

std::string to_string(MessageType t) {
  switch (t) {
    case MessageType::Action: return "action";
    case MessageType::Ack: return "ack";
    case MessageType::Status: return "status";
    case MessageType::Heartbeat: return "heartbeat";
  }
  return "heartbeat";
}

std::optional<MessageType> message_type_from_string(const std::string& s) {
  if (s == "action") return MessageType::Action;
  if (s == "ack") return MessageType::Ack;
  if (s == "status") return MessageType::Status;
  if (s == "heartbeat") return MessageType::Heartbeat;
  return std::nullopt;
}

Bytes encode(const Message& m) {
  nlohmann::ordered_json j;
  j["seq"] = m.seq;
  j["type"] = to_string(m.type);
  j["body"] = m.body;
  const std::string text = j.dump();
  if (text.size() > kMaxMessageLength) throw WireError("message too long");
  const auto n = static_cast<std::uint32_t>(text.size());
  Bytes out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 8),
            static_cast<std::uint8_t>(n)};
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

std::vector<Message> MessageReassembler::feed(std::span<const std::uint8_t> octets) {
  buffer_.insert(buffer_.end(), octets.begin(), octets.end());
  std::vector<Message> out;
  std::size_t pos = 0;
  while (buffer_.size() - pos >= 4) {
    const std::uint32_t n = (std::uint32_t{buffer_[pos]} << 24) | (std::uint32_t{buffer_[pos + 1]} << 16) |
                            (std::uint32_t{buffer_[pos + 2]} << 8) | std::uint32_t{buffer_[pos + 3]};
    if (n > kMaxMessageLength) {
      ++errors_;
      buffer_.clear();
      return out;
    }
    if (buffer_.size() - pos - 4 < n) break;
    const auto* begin = buffer_.data() + pos + 4;
    nlohmann::json j = nlohmann::json::parse(begin, begin + n, nullptr, false);
    pos += 4 + n;
    if (j.is_discarded() || !j.is_object() || !j.contains("seq") || !j["seq"].is_number_unsigned() ||
        !j.contains("type") || !j["type"].is_string()) {
      ++errors_;
      continue;
    }
    const auto type = message_type_from_string(j["type"].get<std::string>());
    if (!type) {
      ++errors_;
      continue;
    }
    Message m;
    m.seq = j["seq"].get<std::uint64_t>();
    m.type = *type;
    m.body = j.value("body", nlohmann::json::object());
    out.push_back(std::move(m));
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
  return out;
}

}  // namespace fdilab::c2
