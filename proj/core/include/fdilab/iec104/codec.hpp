#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fdilab/iec104/apdu.hpp"

namespace fdilab::iec104 {

/// Serializes an APDU to its on-wire octets. Throws InvariantViolation when
/// sequence numbers are out of range, the body does not match the frame kind,
/// or the encoded length would exceed 253.
Bytes encode(const Apdu& apdu);

enum class DecodeStatus : std::uint8_t { Ok, Truncated, BadStart, Malformed };

struct DecodeResult {
  DecodeStatus status = DecodeStatus::Truncated;
  Apdu apdu;
  std::size_t consumed = 0;
  // For Malformed/BadStart: offset of the offending octet.
  std::size_t error_offset = 0;
  std::string error;

  [[nodiscard]] bool ok() const { return status == DecodeStatus::Ok; }
};

/// Decodes one APDU from the front of `octets`. Never throws; any input
/// yields one of the four statuses.
DecodeResult decode(std::span<const std::uint8_t> octets);

/// Splits a byte stream into APDUs; keeps partial frames between calls.
/// A BadStart or Malformed frame is reported once and the buffer is dropped,
/// which mirrors how a receiving endpoint resets after a framing error.
class StreamReassembler {
 public:
  struct Item {
    DecodeStatus status;
    Apdu apdu;
    Bytes raw;  // the octets this item covers
  };

  std::vector<Item> feed(std::span<const std::uint8_t> octets);
  [[nodiscard]] std::size_t buffered() const { return buffer_.size(); }
  void reset() { buffer_.clear(); }

 private:
  Bytes buffer_;
};

// 15-bit sequence arithmetic.
std::uint16_t seq_add(std::uint16_t seq, int delta);
// Signed distance b - a folded into [-16384, 16383].
int seq_diff(std::uint16_t a, std::uint16_t b);

std::string to_string(DecodeStatus status);

}  // namespace fdilab::iec104
