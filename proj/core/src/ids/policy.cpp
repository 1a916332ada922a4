#include "fdilab/ids/policy.hpp"

#include <cmath>
#include <fstream>

namespace fdilab::ids {

using nlohmann::json;

const PolicyEntry* Policy::find(std::uint16_t ca, std::uint32_t ioa) const {
  for (const auto& e : entries) {
    if (e.ca == ca && e.ioa == ioa) return &e;
  }
  return nullptr;
}

Policy default_policy() {
  Policy p;
  p.entries = {
      {1, 1001, 0.0, 1.0, 1.0},
      {4, 1002, 0.0, 0.5, 0.5},
      {3, 1003, -1.0, 1.0, 0.5},
  };
  return p;
}

nlohmann::ordered_json to_json(const Policy& p) {
  nlohmann::ordered_json j;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : p.entries) {
    nlohmann::ordered_json o;
    o["ca"] = e.ca;
    o["ioa"] = e.ioa;
    o["min"] = e.min;
    o["max"] = e.max;
    o["max_step"] = e.max_step;
    j["entries"].push_back(o);
  }
  return j;
}

namespace {

double number_at(const json& o, const std::string& key, const std::string& path) {
  if (!o.contains(key)) throw PolicyError(path + "." + key + ": missing");
  const auto& v = o[key];
  if (!v.is_number() || !std::isfinite(v.get<double>())) throw PolicyError(path + "." + key + ": expected a finite number");
  return v.get<double>();
}

std::uint64_t unsigned_at(const json& o, const std::string& key, const std::string& path, std::uint64_t max) {
  if (!o.contains(key)) throw PolicyError(path + "." + key + ": missing");
  const auto& v = o[key];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::uint64_t>() > max) {
    throw PolicyError(path + "." + key + ": expected an integer in [0, " + std::to_string(max) + "]");
  }
  return v.get<std::uint64_t>();
}

}  // namespace

Policy policy_from_json(const json& j) {
  if (!j.is_object()) throw PolicyError("policy: expected an object");
  if (!j.contains("entries") || !j["entries"].is_array()) throw PolicyError("entries: expected an array");
  Policy p;
  std::size_t i = 0;
  for (const auto& o : j["entries"]) {
    const std::string path = "entries[" + std::to_string(i++) + "]";
    if (!o.is_object()) throw PolicyError(path + ": expected an object");
    PolicyEntry e;
    e.ca = static_cast<std::uint16_t>(unsigned_at(o, "ca", path, 0xFFFF));
    e.ioa = static_cast<std::uint32_t>(unsigned_at(o, "ioa", path, 0xFFFFFF));
    e.min = number_at(o, "min", path);
    e.max = number_at(o, "max", path);
    e.max_step = number_at(o, "max_step", path);
    if (e.max < e.min) throw PolicyError(path + ".max: below min");
    if (e.max_step < 0.0) throw PolicyError(path + ".max_step: negative");
    if (p.find(e.ca, e.ioa) != nullptr) throw PolicyError(path + ": duplicate (ca, ioa)");
    p.entries.push_back(e);
  }
  return p;
}

Policy load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PolicyError(path + ": cannot open");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw PolicyError(path + ": not valid JSON");
  return policy_from_json(j);
}

void write_policy_file(const std::string& path, const Policy& p) {
  std::ofstream out(path);
  if (!out) throw PolicyError(path + ": cannot write");
  out << to_json(p).dump(2) << '\n';
}

}  // namespace fdilab::ids
