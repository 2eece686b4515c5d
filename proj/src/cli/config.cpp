#include "ftle/cli/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "ftle/error.hpp"

namespace ftle::cli {

namespace {

// Every accepted key with its default. The default's JSON type is the key's type;
// keys listed in kGridKeys also accept arrays and range strings.
const Json& schema() {
  static const Json s = Json::parse(R"({
    "seed": 1,
    "threads": 1,
    "out": ".",
    "ensemble": {"n": 5, "mu": 2.0, "sigma2": 1.0, "tau": 0.0},
    "integrator": {
      "dt": 0.001, "t_final": 1.0, "refactor_every": 50, "record_every": 1,
      "warm_start_t0": -1.0, "max_halvings": 30, "implicit_fallback": true,
      "scheme": "ito-euler", "noise": "independent"
    },
    "paths": {"count": 10},
    "dyson": {"sigma_t": 1.0, "t0": -1.0},
    "phase": {
      "n": 50, "tau": "0", "mu_hat": "0.3:0.7:0.05",
      "estimator": "simulate", "t": 50.0, "paths": 50, "dt": 0.002
    },
    "field": {
      "n": 2, "sigma2": 1.0, "tau": 0.0, "length_scale": 1.0, "features": 256,
      "temporal": "white", "t_c": 1.0, "mu": 0.5, "t_final": 5.0, "dt": 0.005,
      "paths": 200, "gdbm_dt": 0.001
    },
    "autocorr": {"horizon": 20.0, "dt": 0.01, "drive": 1.0},
    "fig1": {
      "n": 5, "mu": 2.0, "sigma2": 1.0, "tau": 0.0, "paths": 5,
      "short_t": 2.0, "short_dt": 0.0001, "short_record_every": 100,
      "long_t": 200.0, "long_dt": 0.001, "long_record_every": 1000
    }
  })");
  return s;
}

const std::set<std::string> kGridKeys = {"phase.tau", "phase.mu_hat"};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return Json(v->get());
  if (const auto* v = node.as_floating_point()) return Json(v->get());
  if (const auto* v = node.as_boolean()) return Json(v->get());
  if (const auto* v = node.as_string()) return Json(v->get());
  config_error("unsupported TOML value type");
}

// Coerces `value` to the type of `like`; throws naming `key`.
Json coerce(const std::string& key, const Json& like, const Json& value) {
  if (kGridKeys.count(key)) {
    if (value.is_string() || value.is_number()) return value;
    if (value.is_array()) {
      for (const auto& v : value) {
        if (!v.is_number()) config_error(key + ": grid entries must be numbers");
      }
      return value;
    }
    config_error(key + ": expected a number, list or \"lo:hi:step\" range");
  }
  if (like.is_number_float()) {
    if (!value.is_number()) config_error(key + ": expected a number");
    return Json(value.get<double>());
  }
  if (like.is_number_integer()) {
    if (value.is_number_integer()) return value;
    if (value.is_number_float()) {
      const double d = value.get<double>();
      if (std::floor(d) == d) return Json(static_cast<std::int64_t>(d));
    }
    config_error(key + ": expected an integer");
  }
  if (like.is_string()) {
    if (!value.is_string()) config_error(key + ": expected a string");
    return value;
  }
  if (like.is_boolean()) {
    if (!value.is_boolean()) config_error(key + ": expected true or false");
    return value;
  }
  config_error(key + ": unsupported schema type");
}

void merge(Json& dst, const Json& src, const std::string& prefix) {
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) config_error("unknown key '" + key + "'");
    Json& slot = dst[it.key()];
    if (slot.is_object()) {
      if (!it.value().is_object()) config_error("'" + key + "' must be a table");
      merge(slot, it.value(), key);
    } else {
      slot = coerce(key, slot, it.value());
    }
  }
}

Json* find_slot(Json& root, const std::string& key) {
  Json* cur = &root;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
    if (dot == std::string::npos) return cur;
    start = dot + 1;
  }
}

const Json& lookup(const Json& root, const std::string& key) {
  const Json* slot = find_slot(const_cast<Json&>(root), key);
  if (!slot) config_error("unknown key '" + key + "'");
  return *slot;
}

}  // namespace

ExperimentConfig ExperimentConfig::resolve(const std::string& toml_path,
                                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  cfg.data_ = schema();
  if (!toml_path.empty()) {
    std::ifstream in(toml_path);
    if (!in) config_error("cannot open config file '" + toml_path + "'");
    toml::table table;
    try {
      table = toml::parse(in, toml_path);
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "TOML parse error in '" << toml_path << "': " << e.description();
      config_error(msg.str());
    }
    merge(cfg.data_, toml_to_json(table), "");
  }
  for (const auto& [key, raw] : overrides) {
    Json* slot = find_slot(cfg.data_, key);
    if (!slot || slot->is_object()) config_error("unknown key '" + key + "'");
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = Json(raw);
    // Grid keys keep comma lists as strings.
    if (kGridKeys.count(key) && !value.is_array()) value = value.is_number() ? value : Json(raw);
    *slot = coerce(key, *slot, value);
  }
  return cfg;
}

double ExperimentConfig::number(const std::string& key) const { return lookup(data_, key).get<double>(); }

std::int64_t ExperimentConfig::integer(const std::string& key) const {
  return lookup(data_, key).get<std::int64_t>();
}

std::string ExperimentConfig::text(const std::string& key) const { return lookup(data_, key).get<std::string>(); }

bool ExperimentConfig::flag(const std::string& key) const { return lookup(data_, key).get<bool>(); }

std::vector<double> ExperimentConfig::grid(const std::string& key) const {
  const Json& v = lookup(data_, key);
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) return v.get<std::vector<double>>();
  const std::string s = v.get<std::string>();
  if (s.find(':') != std::string::npos) return parse_range(s);
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      config_error(key + ": cannot parse grid entry '" + item + "'");
    }
  }
  if (out.empty()) config_error(key + ": empty grid");
  return out;
}

std::vector<double> parse_range(const std::string& spec) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    config_error("range '" + spec + "' is not of the form lo:hi:step");
  }
  if (!(step > 0.0) || hi < lo) config_error("range '" + spec + "' needs step > 0 and hi >= lo");
  const auto count = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (count > 100000) config_error("range '" + spec + "' has too many points");
  std::vector<double> out;
  for (std::int64_t k = 0; k < count; ++k) out.push_back(lo + static_cast<double>(k) * step);
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  // Worker count and output location never change results, so they stay out of the hash.
  Json canonical = data_;
  canonical.erase("threads");
  canonical.erase("out");
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

}  // namespace ftle::cli
