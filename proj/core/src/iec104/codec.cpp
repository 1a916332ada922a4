#include "fdilab/iec104/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

namespace fdilab::iec104 {
namespace {

constexpr std::size_t kAsduHeaderSize = 6;
constexpr std::size_t kIoaSize = 3;
constexpr float kSetpointSanityBound = 1.5F;

std::uint8_t u_function_code(UFunction fn) {
  switch (fn) {
    case UFunction::StartDtAct: return 0x07;
    case UFunction::StartDtCon: return 0x0B;
    case UFunction::StopDtAct: return 0x13;
    case UFunction::StopDtCon: return 0x23;
    case UFunction::TestFrAct: return 0x43;
    case UFunction::TestFrCon: return 0x83;
  }
  throw InvariantViolation("unknown U function");
}

bool u_function_from_code(std::uint8_t code, UFunction& out) {
  switch (code) {
    case 0x07: out = UFunction::StartDtAct; return true;
    case 0x0B: out = UFunction::StartDtCon; return true;
    case 0x13: out = UFunction::StopDtAct; return true;
    case 0x23: out = UFunction::StopDtCon; return true;
    case 0x43: out = UFunction::TestFrAct; return true;
    case 0x83: out = UFunction::TestFrCon; return true;
    default: return false;
  }
}

bool is_known_type(std::uint8_t raw) {
  switch (static_cast<TypeId>(raw)) {
    case TypeId::M_SP_NA_1:
    case TypeId::M_ME_NC_1:
    case TypeId::C_SE_NC_1:
    case TypeId::C_IC_NA_1: return true;
  }
  return false;
}

// Octets per information element, IOA excluded.
std::size_t element_size(TypeId type) {
  switch (type) {
    case TypeId::M_SP_NA_1: return 1;
    case TypeId::M_ME_NC_1: return 5;
    case TypeId::C_SE_NC_1: return 5;
    case TypeId::C_IC_NA_1: return 1;
  }
  return 0;
}

bool setpoint_in_bounds(float value) {
  return std::isfinite(value) && std::fabs(value) <= kSetpointSanityBound;
}

void put_float(Bytes& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_float(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

void encode_asdu(const Asdu& asdu, Bytes& out) {
  if (!is_known_type(static_cast<std::uint8_t>(asdu.type_id))) {
    throw InvariantViolation("asdu type id is not modeled; use OpaqueAsdu");
  }
  if (asdu.objects.empty() || asdu.objects.size() > 127) {
    throw InvariantViolation("asdu must carry 1..127 information objects");
  }
  const auto cause = static_cast<std::uint8_t>(asdu.cot);
  if (cause == 0 || cause > 63) throw InvariantViolation("cause of transmission out of range");
  if (asdu.common_address == 0 || asdu.common_address == 0xFFFF) {
    throw InvariantViolation("common address must be in 1..65534");
  }
  out.push_back(static_cast<std::uint8_t>(asdu.type_id));
  out.push_back(static_cast<std::uint8_t>(asdu.objects.size()));  // SQ = 0
  out.push_back(static_cast<std::uint8_t>(cause | (asdu.negative_confirm ? 0x40 : 0) |
                                          (asdu.test_flag ? 0x80 : 0)));
  out.push_back(asdu.originator);
  out.push_back(static_cast<std::uint8_t>(asdu.common_address & 0xFF));
  out.push_back(static_cast<std::uint8_t>(asdu.common_address >> 8));
  for (const auto& obj : asdu.objects) {
    if (obj.ioa > 0xFFFFFF) throw InvariantViolation("information object address exceeds 24 bits");
    out.push_back(static_cast<std::uint8_t>(obj.ioa & 0xFF));
    out.push_back(static_cast<std::uint8_t>((obj.ioa >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((obj.ioa >> 16) & 0xFF));
    switch (asdu.type_id) {
      case TypeId::M_ME_NC_1:
        put_float(out, obj.value);
        out.push_back(obj.quality);
        break;
      case TypeId::C_SE_NC_1:
        if (!setpoint_in_bounds(obj.value)) {
          throw InvariantViolation("set-point value outside [-1.5, 1.5]");
        }
        if (obj.qualifier > 0x7F) throw InvariantViolation("set-point qualifier exceeds 7 bits");
        put_float(out, obj.value);
        out.push_back(static_cast<std::uint8_t>(obj.qualifier | (obj.select ? 0x80 : 0)));
        break;
      case TypeId::C_IC_NA_1:
        out.push_back(obj.qualifier);
        break;
      case TypeId::M_SP_NA_1:
        if ((obj.quality & 0x0F) != 0) throw InvariantViolation("single-point quality uses bits 4..7");
        out.push_back(static_cast<std::uint8_t>((obj.value != 0.0F ? 0x01 : 0x00) | obj.quality));
        break;
    }
  }
}

// Returns the structured ASDU or an opaque copy when the body is not modeled.
std::variant<std::monostate, Asdu, OpaqueAsdu> decode_asdu(std::span<const std::uint8_t> octets) {
  auto opaque = [&] { return OpaqueAsdu{Bytes(octets.begin(), octets.end())}; };
  if (octets.size() < kAsduHeaderSize || !is_known_type(octets[0])) return opaque();
  const auto type = static_cast<TypeId>(octets[0]);
  const std::uint8_t vsq = octets[1];
  const std::size_t count = vsq & 0x7F;
  if ((vsq & 0x80) != 0 || count == 0) return opaque();
  if (octets.size() != kAsduHeaderSize + count * (kIoaSize + element_size(type))) return opaque();

  Asdu asdu;
  asdu.type_id = type;
  const std::uint8_t cause = octets[2] & 0x3F;
  if (cause == 0) return opaque();
  asdu.cot = static_cast<Cot>(cause);
  asdu.negative_confirm = (octets[2] & 0x40) != 0;
  asdu.test_flag = (octets[2] & 0x80) != 0;
  asdu.originator = octets[3];
  asdu.common_address = static_cast<std::uint16_t>(octets[4] | (octets[5] << 8));
  if (asdu.common_address == 0 || asdu.common_address == 0xFFFF) return opaque();

  const std::uint8_t* p = octets.data() + kAsduHeaderSize;
  asdu.objects.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    InformationObject obj;
    obj.ioa = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
              (static_cast<std::uint32_t>(p[2]) << 16);
    p += kIoaSize;
    switch (type) {
      case TypeId::M_ME_NC_1:
        obj.value = get_float(p);
        obj.quality = p[4];
        break;
      case TypeId::C_SE_NC_1:
        obj.value = get_float(p);
        if (!setpoint_in_bounds(obj.value)) return opaque();
        obj.qualifier = p[4] & 0x7F;
        obj.select = (p[4] & 0x80) != 0;
        break;
      case TypeId::C_IC_NA_1:
        obj.qualifier = p[0];
        break;
      case TypeId::M_SP_NA_1:
        if ((p[0] & 0x0E) != 0) return opaque();
        obj.value = (p[0] & 0x01) != 0 ? 1.0F : 0.0F;
        obj.quality = p[0] & 0xF0;
        break;
    }
    p += element_size(type);
    asdu.objects.push_back(obj);
  }
  return asdu;
}

void put_seq(Bytes& out, std::uint16_t seq) {
  out.push_back(static_cast<std::uint8_t>((seq << 1) & 0xFE));
  out.push_back(static_cast<std::uint8_t>(seq >> 7));
}

DecodeResult fail(DecodeStatus status, std::size_t offset, std::string why) {
  DecodeResult r;
  r.status = status;
  r.error_offset = offset;
  r.error = std::move(why);
  return r;
}

}  // namespace

bool operator==(const InformationObject& a, const InformationObject& b) {
  return a.ioa == b.ioa && std::bit_cast<std::uint32_t>(a.value) == std::bit_cast<std::uint32_t>(b.value) &&
         a.quality == b.quality && a.qualifier == b.qualifier && a.select == b.select;
}

Bytes encode(const Apdu& apdu) {
  Bytes out;
  out.reserve(2 + kMaxApduLength);
  out.push_back(kStartOctet);
  out.push_back(0);  // length, patched below
  const auto& apci = apdu.apci;
  switch (apci.kind) {
    case FrameKind::I: {
      if (apci.tx >= kSeqModulus || apci.rx >= kSeqModulus) {
        throw InvariantViolation("sequence number exceeds 15 bits");
      }
      if (std::holds_alternative<std::monostate>(apdu.body)) {
        throw InvariantViolation("I-frame must carry an ASDU");
      }
      put_seq(out, apci.tx);
      put_seq(out, apci.rx);
      if (const auto* asdu = apdu.asdu()) {
        encode_asdu(*asdu, out);
      } else {
        const auto& raw = std::get<OpaqueAsdu>(apdu.body).octets;
        if (raw.empty()) throw InvariantViolation("opaque ASDU is empty");
        out.insert(out.end(), raw.begin(), raw.end());
      }
      break;
    }
    case FrameKind::S:
      if (apci.rx >= kSeqModulus) throw InvariantViolation("sequence number exceeds 15 bits");
      if (!std::holds_alternative<std::monostate>(apdu.body)) {
        throw InvariantViolation("S-frame carries no ASDU");
      }
      out.push_back(0x01);
      out.push_back(0x00);
      put_seq(out, apci.rx);
      break;
    case FrameKind::U:
      if (!std::holds_alternative<std::monostate>(apdu.body)) {
        throw InvariantViolation("U-frame carries no ASDU");
      }
      out.push_back(u_function_code(apci.u_function));
      out.push_back(0x00);
      out.push_back(0x00);
      out.push_back(0x00);
      break;
  }
  const std::size_t length = out.size() - 2;
  if (length > kMaxApduLength) throw InvariantViolation("APDU longer than 253 octets");
  out[1] = static_cast<std::uint8_t>(length);
  return out;
}

DecodeResult decode(std::span<const std::uint8_t> octets) {
  if (octets.empty()) return fail(DecodeStatus::Truncated, 0, "empty input");
  if (octets[0] != kStartOctet) return fail(DecodeStatus::BadStart, 0, "start octet is not 0x68");
  if (octets.size() < 2) return fail(DecodeStatus::Truncated, 1, "missing length octet");
  const std::uint8_t length = octets[1];
  if (length < kMinApduLength || length > kMaxApduLength) {
    return fail(DecodeStatus::Malformed, 1, "length octet outside 4..253");
  }
  const std::size_t total = 2U + length;
  if (octets.size() < total) return fail(DecodeStatus::Truncated, octets.size(), "frame incomplete");

  const std::uint8_t c0 = octets[2];
  const std::uint8_t c1 = octets[3];
  const std::uint8_t c2 = octets[4];
  const std::uint8_t c3 = octets[5];

  DecodeResult r;
  r.status = DecodeStatus::Ok;
  r.consumed = total;
  if ((c0 & 0x01) == 0) {
    if ((c2 & 0x01) != 0) return fail(DecodeStatus::Malformed, 4, "I-frame receive field LSB set");
    if (length == kMinApduLength) return fail(DecodeStatus::Malformed, 1, "I-frame without ASDU");
    r.apdu.apci.kind = FrameKind::I;
    r.apdu.apci.tx = static_cast<std::uint16_t>((c0 >> 1) | (c1 << 7));
    r.apdu.apci.rx = static_cast<std::uint16_t>((c2 >> 1) | (c3 << 7));
    r.apdu.body = decode_asdu(octets.subspan(6, length - kMinApduLength));
  } else if ((c0 & 0x03) == 0x01) {
    if (length != kMinApduLength) return fail(DecodeStatus::Malformed, 1, "S-frame length must be 4");
    if (c0 != 0x01) return fail(DecodeStatus::Malformed, 2, "S-frame control octet 1 reserved bits set");
    if (c1 != 0x00) return fail(DecodeStatus::Malformed, 3, "S-frame control octet 2 must be zero");
    if ((c2 & 0x01) != 0) return fail(DecodeStatus::Malformed, 4, "S-frame receive field LSB set");
    r.apdu.apci.kind = FrameKind::S;
    r.apdu.apci.rx = static_cast<std::uint16_t>((c2 >> 1) | (c3 << 7));
  } else {
    if (length != kMinApduLength) return fail(DecodeStatus::Malformed, 1, "U-frame length must be 4");
    UFunction fn{};
    if (!u_function_from_code(c0, fn)) {
      return fail(DecodeStatus::Malformed, 2, "U-frame must set exactly one function bit");
    }
    if (c1 != 0) return fail(DecodeStatus::Malformed, 3, "U-frame control octet 2 must be zero");
    if (c2 != 0) return fail(DecodeStatus::Malformed, 4, "U-frame control octet 3 must be zero");
    if (c3 != 0) return fail(DecodeStatus::Malformed, 5, "U-frame control octet 4 must be zero");
    r.apdu.apci.kind = FrameKind::U;
    r.apdu.apci.u_function = fn;
  }
  return r;
}

std::vector<StreamReassembler::Item> StreamReassembler::feed(std::span<const std::uint8_t> octets) {
  buffer_.insert(buffer_.end(), octets.begin(), octets.end());
  std::vector<Item> items;
  std::size_t offset = 0;
  while (offset < buffer_.size()) {
    auto view = std::span<const std::uint8_t>(buffer_).subspan(offset);
    auto result = decode(view);
    if (result.status == DecodeStatus::Truncated) break;
    if (result.status != DecodeStatus::Ok) {
      items.push_back({result.status, {}, Bytes(view.begin(), view.end())});
      offset = buffer_.size();
      break;
    }
    items.push_back({DecodeStatus::Ok, std::move(result.apdu),
                     Bytes(view.begin(), view.begin() + static_cast<std::ptrdiff_t>(result.consumed))});
    offset += result.consumed;
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset));
  return items;
}

std::uint16_t seq_add(std::uint16_t seq, int delta) {
  const int m = kSeqModulus;
  int v = (static_cast<int>(seq) + delta) % m;
  if (v < 0) v += m;
  return static_cast<std::uint16_t>(v);
}

int seq_diff(std::uint16_t a, std::uint16_t b) {
  int d = (static_cast<int>(b) - static_cast<int>(a)) % kSeqModulus;
  if (d < 0) d += kSeqModulus;
  if (d >= kSeqModulus / 2) d -= kSeqModulus;
  return d;
}

Apdu make_i_frame(std::uint16_t tx, std::uint16_t rx, Asdu asdu) {
  Apdu a;
  a.apci.kind = FrameKind::I;
  a.apci.tx = tx;
  a.apci.rx = rx;
  a.body = std::move(asdu);
  return a;
}

Apdu make_s_frame(std::uint16_t rx) {
  Apdu a;
  a.apci.kind = FrameKind::S;
  a.apci.rx = rx;
  return a;
}

Apdu make_u_frame(UFunction fn) {
  Apdu a;
  a.apci.kind = FrameKind::U;
  a.apci.u_function = fn;
  return a;
}

std::string to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::I: return "I";
    case FrameKind::S: return "S";
    case FrameKind::U: return "U";
  }
  return "?";
}

std::string to_string(UFunction fn) {
  switch (fn) {
    case UFunction::StartDtAct: return "STARTDT_act";
    case UFunction::StartDtCon: return "STARTDT_con";
    case UFunction::StopDtAct: return "STOPDT_act";
    case UFunction::StopDtCon: return "STOPDT_con";
    case UFunction::TestFrAct: return "TESTFR_act";
    case UFunction::TestFrCon: return "TESTFR_con";
  }
  return "?";
}

std::string to_string(TypeId type_id) {
  switch (type_id) {
    case TypeId::M_SP_NA_1: return "M_SP_NA_1";
    case TypeId::M_ME_NC_1: return "M_ME_NC_1";
    case TypeId::C_SE_NC_1: return "C_SE_NC_1";
    case TypeId::C_IC_NA_1: return "C_IC_NA_1";
  }
  return "type_" + std::to_string(static_cast<int>(type_id));
}

std::string to_string(DecodeStatus status) {
  switch (status) {
    case DecodeStatus::Ok: return "Ok";
    case DecodeStatus::Truncated: return "Truncated";
    case DecodeStatus::BadStart: return "BadStart";
    case DecodeStatus::Malformed: return "Malformed";
  }
  return "?";
}

std::string describe(const Apdu& apdu) {
  std::ostringstream os;
  switch (apdu.apci.kind) {
    case FrameKind::I: os << "I(tx=" << apdu.apci.tx << ",rx=" << apdu.apci.rx << ")"; break;
    case FrameKind::S: os << "S(rx=" << apdu.apci.rx << ")"; break;
    case FrameKind::U: os << "U(" << to_string(apdu.apci.u_function) << ")"; break;
  }
  if (const auto* asdu = apdu.asdu()) {
    os << " " << to_string(asdu->type_id) << " cot=" << static_cast<int>(asdu->cot)
       << (asdu->negative_confirm ? " neg" : "") << " ca=" << asdu->common_address;
    for (const auto& obj : asdu->objects) os << " [" << obj.ioa << "]=" << obj.value;
  } else if (const auto* raw = std::get_if<OpaqueAsdu>(&apdu.body)) {
    os << " opaque(" << raw->octets.size() << " octets)";
  }
  return os.str();
}

}  // namespace fdilab::iec104
