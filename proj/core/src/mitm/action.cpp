#include "fdilab/mitm/action.hpp"

namespace fdilab::mitm {

using nlohmann::json;

std::string to_string(Direction d) { return d == Direction::ToRtu ? "toRTU" : "toMTU"; }

std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Inject: return "Inject";
    case ActionKind::Modify: return "Modify";
    case ActionKind::Drop: return "Drop";
    case ActionKind::Collect: return "Collect";
    case ActionKind::Passthrough: return "Passthrough";
  }
  return "Passthrough";
}

bool Match::matches(const iec104::Asdu& asdu) const {
  if (type_id && *type_id != asdu.type_id) return false;
  if (common_address && *common_address != asdu.common_address) return false;
  if (cot && *cot != static_cast<std::uint8_t>(asdu.cot)) return false;
  if (ioa) {
    bool any = false;
    for (const auto& io : asdu.objects) any = any || io.ioa == *ioa;
    if (!any) return false;
  }
  return true;
}

iec104::Asdu Forge::asdu() const {
  iec104::Asdu a;
  a.type_id = type_id;
  a.cot = cot;
  a.common_address = common_address;
  iec104::InformationObject io;
  io.ioa = ioa;
  io.value = value;
  if (type_id == iec104::TypeId::C_IC_NA_1) {
    io.value = 0.0F;
    io.qualifier = iec104::kQoiStation;
  }
  a.objects.push_back(io);
  return a;
}

void Action::validate() const {
  if (kind == ActionKind::Inject && !forge) throw InvalidAction("Inject requires forge");
  if ((kind == ActionKind::Modify || kind == ActionKind::Drop) && !match) {
    throw InvalidAction(to_string(kind) + " requires match");
  }
  if (until && *until < at_time) throw InvalidAction("until precedes at_time");
}

namespace {

iec104::TypeId type_from_json(const json& j, const std::string& field) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "M_SP_NA_1") return iec104::TypeId::M_SP_NA_1;
    if (s == "M_ME_NC_1") return iec104::TypeId::M_ME_NC_1;
    if (s == "C_SE_NC_1") return iec104::TypeId::C_SE_NC_1;
    if (s == "C_IC_NA_1") return iec104::TypeId::C_IC_NA_1;
  } else if (j.is_number_integer()) {
    const int v = j.get<int>();
    if (v == 1 || v == 13 || v == 50 || v == 100) return static_cast<iec104::TypeId>(v);
  }
  throw InvalidAction(field + ": unsupported type id");
}

template <typename T>
T number(const json& obj, const char* key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw InvalidAction(path + "." + key + ": expected a number");
  return v.get<T>();
}

}  // namespace

json to_json(const Action& a) {
  json j;
  j["kind"] = to_string(a.kind);
  j["direction"] = to_string(a.direction);
  j["at_time"] = a.at_time;
  if (a.until) j["until"] = *a.until;
  if (a.match) {
    json m = json::object();
    if (a.match->type_id) m["type_id"] = iec104::to_string(*a.match->type_id);
    if (a.match->common_address) m["ca"] = *a.match->common_address;
    if (a.match->ioa) m["ioa"] = *a.match->ioa;
    if (a.match->cot) m["cot"] = *a.match->cot;
    j["match"] = m;
  }
  if (a.forge) {
    j["forge"] = {{"type_id", iec104::to_string(a.forge->type_id)},
                  {"cot", static_cast<int>(a.forge->cot)},
                  {"ca", a.forge->common_address},
                  {"ioa", a.forge->ioa},
                  {"value", a.forge->value}};
  }
  if (a.kind == ActionKind::Modify) j["rewrite"] = {{"scale", a.rewrite.scale}, {"offset", a.rewrite.offset}};
  return j;
}

Action action_from_json(const json& j) {
  if (!j.is_object()) throw InvalidAction("action: expected an object");
  Action a;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Inject") a.kind = ActionKind::Inject;
    else if (kind == "Modify") a.kind = ActionKind::Modify;
    else if (kind == "Drop") a.kind = ActionKind::Drop;
    else if (kind == "Collect") a.kind = ActionKind::Collect;
    else if (kind == "Passthrough") a.kind = ActionKind::Passthrough;
    else throw InvalidAction("action.kind: unknown kind " + kind);

    const auto dir = j.value("direction", std::string("toRTU"));
    if (dir == "toRTU") a.direction = Direction::ToRtu;
    else if (dir == "toMTU") a.direction = Direction::ToMtu;
    else throw InvalidAction("action.direction: expected toRTU or toMTU");

    if (j.contains("at_time")) a.at_time = number<double>(j, "at_time", "action");
    if (j.contains("until")) a.until = number<double>(j, "until", "action");
    if (j.contains("match")) {
      const auto& m = j.at("match");
      Match match;
      if (m.contains("type_id")) match.type_id = type_from_json(m.at("type_id"), "action.match.type_id");
      if (m.contains("ca")) match.common_address = number<std::uint16_t>(m, "ca", "action.match");
      if (m.contains("ioa")) match.ioa = number<std::uint32_t>(m, "ioa", "action.match");
      if (m.contains("cot")) match.cot = number<std::uint8_t>(m, "cot", "action.match");
      a.match = match;
    }
    if (j.contains("forge")) {
      const auto& f = j.at("forge");
      Forge forge;
      if (f.contains("type_id")) forge.type_id = type_from_json(f.at("type_id"), "action.forge.type_id");
      if (f.contains("cot")) forge.cot = static_cast<iec104::Cot>(number<int>(f, "cot", "action.forge"));
      forge.common_address = number<std::uint16_t>(f, "ca", "action.forge");
      forge.ioa = number<std::uint32_t>(f, "ioa", "action.forge");
      if (f.contains("value")) forge.value = number<float>(f, "value", "action.forge");
      a.forge = forge;
    }
    if (j.contains("rewrite")) {
      const auto& r = j.at("rewrite");
      if (r.contains("scale")) a.rewrite.scale = number<double>(r, "scale", "action.rewrite");
      if (r.contains("offset")) a.rewrite.offset = number<double>(r, "offset", "action.rewrite");
    }
  } catch (const json::exception& e) {
    throw InvalidAction(std::string("action: ") + e.what());
  }
  a.validate();
  return a;
}

}  // namespace fdilab::mitm
