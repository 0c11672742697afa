// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON form of RunConfig. Parsing is strict: unknown keys and wrong types
// are errors, missing keys keep their defaults.

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mirrorloop/protocol.hpp"

namespace mirrorloop {

namespace detail {

using nlohmann::json;

class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  // Throws for any key not read through get()/has().
  void finish(const std::set<std::string>& also_allowed = {}) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key()) && !also_allowed.contains(it.key())) {
        throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      const json& v = j_.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::uint64_t synonym_table_hash(const SynonymTable& t) {
  std::string flat;
  for (const auto& [w, alts] : t) {
    flat += w;
    flat += ':';
    for (const auto& a : alts) {
      flat += a;
      flat += ',';
    }
    flat += ';';
  }
  return fnv1a64(flat);
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline nlohmann::json embedder_to_json(const EmbedderSpec& e) {
  nlohmann::json j;
  j["kind"] = e.kind == EmbedderKind::kHashing ? "hashing" : "remote";
  j["dimension"] = e.dimension;
  j["gram_lengths"] = std::vector<std::size_t>(e.gram_lengths.begin(),
                                               e.gram_lengths.end());
  j["hash_seed"] = e.hash_seed;
  if (e.model_name) j["model_name"] = *e.model_name;
  j["endpoint"] = e.endpoint;
  j["api_key_env"] = e.api_key_env;
  return j;
}

inline EmbedderSpec embedder_from_json(const nlohmann::json& j,
                                       const std::string& path = "embedder") {
  detail::StrictObject o(j, path);
  EmbedderSpec e;
  std::string kind = "hashing";
  o.get("kind", kind);
  if (kind == "hashing") {
    e.kind = EmbedderKind::kHashing;
  } else if (kind == "remote") {
    e.kind = EmbedderKind::kRemote;
  } else {
    throw ConfigError(path + ".kind: expected 'hashing' or 'remote'");
  }
  o.get("dimension", e.dimension);
  if (o.has("gram_lengths")) {
    std::vector<std::size_t> g;
    o.get("gram_lengths", g);
    e.gram_lengths = std::set<std::size_t>(g.begin(), g.end());
  }
  o.get("hash_seed", e.hash_seed);
  if (o.has("model_name")) {
    std::string m;
    o.get("model_name", m);
    e.model_name = m;
  }
  o.get("endpoint", e.endpoint);
  o.get("api_key_env", e.api_key_env);
  o.finish();
  return e;
}

inline nlohmann::json scripted_to_json(const ScriptedProviderConfig& s) {
  return {
      {"decay_rate", s.decay_rate},
      {"base_change", s.base_change},
      {"noise_amplitude", s.noise_amplitude},
      {"rebound_gain", s.rebound_gain},
      {"seed", s.seed},
      {"compliance_violation_rate", s.compliance_violation_rate},
      {"initial_error_rate", s.initial_error_rate},
      {"reference_temperature", s.reference_temperature},
      {"synonym_table_hash", detail::hex64(detail::synonym_table_hash(s.synonym_table))},
  };
}

inline ScriptedProviderConfig scripted_from_json(const nlohmann::json& j,
                                                 const std::string& path = "scripted") {
  detail::StrictObject o(j, path);
  ScriptedProviderConfig s;
  o.get("decay_rate", s.decay_rate);
  o.get("base_change", s.base_change);
  o.get("noise_amplitude", s.noise_amplitude);
  o.get("rebound_gain", s.rebound_gain);
  o.get("seed", s.seed);
  o.get("compliance_violation_rate", s.compliance_violation_rate);
  o.get("initial_error_rate", s.initial_error_rate);
  o.get("reference_temperature", s.reference_temperature);
  if (o.has("synonym_groups")) {
    std::vector<std::vector<std::string>> groups;
    o.get("synonym_groups", groups);
    s.synonym_table = synonym_table_from_groups(groups);
  }
  // Calibrate decay and rebound from target percentages instead of setting
  // them directly.
  if (o.has("calibrate")) {
    detail::StrictObject c(o.at("calibrate"), path + ".calibrate");
    double reduction = 55.0, rebound = 28.4;
    int g = 3;
    c.get("reduction_pct", reduction);
    c.get("rebound_pct", rebound);
    c.get("grounding_iteration", g);
    c.finish();
    const auto cal = ScriptedProviderConfig::calibrated(s.base_change, reduction,
                                                        rebound, g);
    s.decay_rate = cal.decay_rate;
    s.rebound_gain = cal.rebound_gain;
  }
  // The hash written by scripted_to_json is informational.
  o.finish({"synonym_table_hash"});
  return s;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  std::vector<std::string> models;
  for (const auto& m : c.models) models.push_back(m.to_string());
  j["models"] = models;
  j["iterations"] = c.iterations;
  j["grounding_iteration"] = c.grounding_iteration;
  j["grounding_period"] = c.grounding_period;
  std::vector<std::string> conds;
  for (auto cond : c.conditions) conds.push_back(to_string(cond));
  j["conditions"] = conds;
  j["temperature"] = c.temperature;
  j["seed"] = c.seed;
  j["per_family_count"] = c.per_family_count;
  j["max_output"] = c.max_output;
  j["critique_template"] = c.critique_template;
  j["system_text"] = c.system_text;
  j["embedder"] = embedder_to_json(c.embedder);
  j["detector"] = {{"window", c.detector.window},
                   {"drift_threshold", c.detector.drift_threshold},
                   {"novelty_threshold", c.detector.novelty_threshold}};
  j["fork"] = {{"enabled", c.fork.enabled},
               {"temperature_a", c.fork.temperature_a},
               {"temperature_b", c.fork.temperature_b}};
  j["scripted"] = scripted_to_json(c.scripted);
  j["providers"] = {{"requests_per_minute", c.providers.requests_per_minute},
                    {"max_attempts", c.providers.max_attempts},
                    {"base_delay_ms", c.providers.base_delay_ms},
                    {"max_delay_ms", c.providers.max_delay_ms},
                    {"timeout_seconds", c.providers.timeout_seconds},
                    {"base_urls", c.providers.base_urls}};
  j["logical_clock"] = c.logical_clock;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::StrictObject o(j, "config");
  RunConfig c;
  if (o.has("models")) {
    std::vector<std::string> models;
    o.get("models", models);
    c.models.clear();
    for (const auto& m : models) c.models.push_back(ProviderId::parse(m));
  }
  o.get("iterations", c.iterations);
  o.get("grounding_iteration", c.grounding_iteration);
  o.get("grounding_period", c.grounding_period);
  if (o.has("conditions")) {
    std::vector<std::string> conds;
    o.get("conditions", conds);
    c.conditions.clear();
    for (const auto& s : conds) c.conditions.push_back(parse_condition(s));
  }
  o.get("temperature", c.temperature);
  o.get("seed", c.seed);
  o.get("per_family_count", c.per_family_count);
  o.get("max_output", c.max_output);
  o.get("critique_template", c.critique_template);
  o.get("system_text", c.system_text);
  if (o.has("embedder")) c.embedder = embedder_from_json(o.at("embedder"));
  if (o.has("detector")) {
    detail::StrictObject d(o.at("detector"), "config.detector");
    d.get("window", c.detector.window);
    d.get("drift_threshold", c.detector.drift_threshold);
    d.get("novelty_threshold", c.detector.novelty_threshold);
    d.finish();
  }
  if (o.has("fork")) {
    detail::StrictObject f(o.at("fork"), "config.fork");
    f.get("enabled", c.fork.enabled);
    f.get("temperature_a", c.fork.temperature_a);
    f.get("temperature_b", c.fork.temperature_b);
    f.finish();
  }
  if (o.has("scripted")) c.scripted = scripted_from_json(o.at("scripted"));
  if (o.has("providers")) {
    detail::StrictObject p(o.at("providers"), "config.providers");
    p.get("requests_per_minute", c.providers.requests_per_minute);
    p.get("max_attempts", c.providers.max_attempts);
    p.get("base_delay_ms", c.providers.base_delay_ms);
    p.get("max_delay_ms", c.providers.max_delay_ms);
    p.get("timeout_seconds", c.providers.timeout_seconds);
    p.get("base_urls", c.providers.base_urls);
    p.finish();
  }
  o.get("logical_clock", c.logical_clock);
  o.finish();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// Stable identifier of a configuration: FNV-1a over the canonical JSON.
inline std::string config_fingerprint(const RunConfig& c) {
  return detail::hex64(fnv1a64(run_config_to_json(c).dump()));
}

}  // namespace mirrorloop
