#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fdilab::iec104 {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kStartOctet = 0x68;
inline constexpr std::uint16_t kSeqModulus = 32768;
inline constexpr std::uint8_t kMinApduLength = 4;
inline constexpr std::uint8_t kMaxApduLength = 253;
inline constexpr std::uint16_t kDefaultPort = 2404;

enum class FrameKind : std::uint8_t { I, S, U };

enum class UFunction : std::uint8_t {
  StartDtAct,
  StartDtCon,
  StopDtAct,
  StopDtCon,
  TestFrAct,
  TestFrCon,
};

// Only these type ids are interpreted; anything else is carried as OpaqueAsdu.
enum class TypeId : std::uint8_t {
  M_SP_NA_1 = 1,
  M_ME_NC_1 = 13,
  C_SE_NC_1 = 50,
  C_IC_NA_1 = 100,
};

// Open enum: the 6-bit cause is kept numerically even when it is not one of
// the named values.
enum class Cot : std::uint8_t {
  Periodic = 1,
  Spontaneous = 3,
  Activation = 6,
  ActivationCon = 7,
  ActivationTerm = 10,
  Interrogated = 20,
};

// Quality descriptor bits (QDS / SIQ upper nibble).
namespace quality {
inline constexpr std::uint8_t kOverflow = 0x01;
inline constexpr std::uint8_t kBlocked = 0x10;
inline constexpr std::uint8_t kSubstituted = 0x20;
inline constexpr std::uint8_t kNotTopical = 0x40;
inline constexpr std::uint8_t kInvalid = 0x80;
}  // namespace quality

inline constexpr std::uint8_t kQoiStation = 20;

struct Apci {
  FrameKind kind = FrameKind::U;
  std::uint16_t tx = 0;  // I only
  std::uint16_t rx = 0;  // I and S
  UFunction u_function = UFunction::TestFrAct;  // U only

  friend bool operator==(const Apci& a, const Apci& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case FrameKind::I: return a.tx == b.tx && a.rx == b.rx;
      case FrameKind::S: return a.rx == b.rx;
      case FrameKind::U: return a.u_function == b.u_function;
    }
    return false;
  }
};

/// One information object. Which fields are meaningful depends on the ASDU
/// type:
///   M_ME_NC_1  value (short float) + quality (QDS)
///   C_SE_NC_1  value (short float) + qualifier (QL, 7 bit) + select (S/E)
///   C_IC_NA_1  qualifier (QOI)
///   M_SP_NA_1  value 0/1 (SPI) + quality (BL/SB/NT/IV bits)
/// Unused fields are zero after decode.
struct InformationObject {
  std::uint32_t ioa = 0;  // 24 bit
  float value = 0.0F;
  std::uint8_t quality = 0;
  std::uint8_t qualifier = 0;
  bool select = false;

  // Compares floats by bit pattern so NaN payloads and signed zero roundtrip.
  friend bool operator==(const InformationObject& a, const InformationObject& b);
};

struct Asdu {
  TypeId type_id = TypeId::M_ME_NC_1;
  Cot cot = Cot::Spontaneous;
  bool negative_confirm = false;
  bool test_flag = false;
  std::uint8_t originator = 0;
  std::uint16_t common_address = 1;
  std::vector<InformationObject> objects;

  friend bool operator==(const Asdu&, const Asdu&) = default;

  [[nodiscard]] bool is_command_activation() const {
    return type_id == TypeId::C_SE_NC_1 && cot == Cot::Activation;
  }
};

/// ASDU octets that the codec does not model (unknown type id, SQ=1, or an
/// inconsistent body). Forwarded verbatim.
struct OpaqueAsdu {
  Bytes octets;
  friend bool operator==(const OpaqueAsdu&, const OpaqueAsdu&) = default;
};

struct Apdu {
  Apci apci;
  std::variant<std::monostate, Asdu, OpaqueAsdu> body;

  friend bool operator==(const Apdu&, const Apdu&) = default;

  [[nodiscard]] const Asdu* asdu() const { return std::get_if<Asdu>(&body); }
  [[nodiscard]] Asdu* asdu() { return std::get_if<Asdu>(&body); }
  [[nodiscard]] bool is_i() const { return apci.kind == FrameKind::I; }
  [[nodiscard]] bool is_s() const { return apci.kind == FrameKind::S; }
  [[nodiscard]] bool is_u() const { return apci.kind == FrameKind::U; }
};

class InvariantViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Constructors for the frames the endpoints send.
Apdu make_i_frame(std::uint16_t tx, std::uint16_t rx, Asdu asdu);
Apdu make_s_frame(std::uint16_t rx);
Apdu make_u_frame(UFunction fn);

std::string to_string(FrameKind kind);
std::string to_string(UFunction fn);
std::string to_string(TypeId type_id);
std::string describe(const Apdu& apdu);

}  // namespace fdilab::iec104
