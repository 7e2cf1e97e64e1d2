#pragma once

// TOML experiment configuration.
//
//   [model]       c, omega | frequency (cycles per step), q, r2
//   [init]        x0 = [..], P0 = [[..], [..]]
//   [censoring]   lower, upper   (omit either side for an infinite limit)
//   [run]         steps, replications, seed, variants = ["KF", "MissingKF", "CKF"], threads
//   [estimation]  enabled, ckf_uses_estimate, r2_min, r2_max
//
// Unknown tables or keys are rejected.

#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <set>
#include <string>
#include <string_view>

#include <toml.hpp>

#include "ckf/bench.hpp"
#include "ckf/errors.hpp"

namespace ckf::config {

namespace detail {

inline void check_keys(const toml::table& t, std::string_view where, std::initializer_list<std::string_view> allowed) {
  const std::set<std::string_view> ok(allowed);
  for (const auto& [k, v] : t)
    if (!ok.count(k.str())) throw domain_error("config: unknown key '" + std::string(k.str()) + "' in " + std::string(where));
}

inline double number(const toml::node& n, std::string_view key) {
  if (auto d = n.value<double>()) return *d;
  throw domain_error("config: '" + std::string(key) + "' must be a number");
}

inline void read_number(const toml::table& t, std::string_view key, double& out) {
  if (const auto* n = t.get(key)) out = number(*n, key);
}

inline Eigen::VectorXd vector(const toml::node& n, std::string_view key) {
  const auto* arr = n.as_array();
  if (!arr) throw domain_error("config: '" + std::string(key) + "' must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr->size()));
  for (std::size_t i = 0; i < arr->size(); ++i) v[static_cast<Eigen::Index>(i)] = number(*arr->get(i), key);
  return v;
}

inline Eigen::MatrixXd matrix(const toml::node& n, std::string_view key) {
  const auto* arr = n.as_array();
  if (!arr || arr->empty()) throw domain_error("config: '" + std::string(key) + "' must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(arr->size());
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector(*arr->get(static_cast<std::size_t>(r)), key);
    if (r == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) throw domain_error("config: '" + std::string(key) + "' has ragged rows");
    m.row(r) = row.transpose();
  }
  return m;
}

}  // namespace detail

inline bench::ExperimentConfig from_toml(const toml::table& root) {
  using detail::check_keys;
  bench::ExperimentConfig cfg;
  check_keys(root, "top level", {"model", "init", "censoring", "run", "estimation"});

  if (const auto* t = root["model"].as_table()) {
    check_keys(*t, "[model]", {"c", "omega", "frequency", "q", "r2"});
    detail::read_number(*t, "c", cfg.c);
    detail::read_number(*t, "q", cfg.q);
    detail::read_number(*t, "r2", cfg.r2);
    if (t->contains("omega") && t->contains("frequency"))
      throw domain_error("config: give either omega or frequency in [model], not both");
    detail::read_number(*t, "omega", cfg.omega);
    if (const auto* f = t->get("frequency")) cfg.omega = 2.0 * std::numbers::pi * detail::number(*f, "frequency");
  }
  if (const auto* t = root["init"].as_table()) {
    check_keys(*t, "[init]", {"x0", "P0"});
    if (const auto* n = t->get("x0")) cfg.x0 = detail::vector(*n, "x0");
    if (const auto* n = t->get("P0")) cfg.P0 = detail::matrix(*n, "P0");
  }
  if (const auto* t = root["censoring"].as_table()) {
    check_keys(*t, "[censoring]", {"lower", "upper"});
    cfg.lower = -kInf;
    cfg.upper = kInf;
    detail::read_number(*t, "lower", cfg.lower);
    detail::read_number(*t, "upper", cfg.upper);
  }
  if (const auto* t = root["run"].as_table()) {
    check_keys(*t, "[run]", {"steps", "replications", "seed", "variants", "threads"});
    const auto count = [&](std::string_view key, auto& out) {
      if (const auto* n = t->get(key)) {
        const auto v = n->value<std::int64_t>();
        if (!v || *v < 0) throw domain_error("config: '" + std::string(key) + "' must be a non-negative integer");
        out = static_cast<std::remove_reference_t<decltype(out)>>(*v);
      }
    };
    count("steps", cfg.steps);
    count("replications", cfg.replications);
    count("seed", cfg.seed);
    count("threads", cfg.threads);
    if (const auto* n = t->get("variants")) {
      const auto* arr = n->as_array();
      if (!arr) throw domain_error("config: 'variants' must be an array of strings");
      cfg.variants.clear();
      for (const auto& el : *arr) {
        const auto s = el.value<std::string>();
        if (!s) throw domain_error("config: 'variants' must be an array of strings");
        cfg.variants.push_back(parse_variant(*s));
      }
    }
  }
  if (const auto* t = root["estimation"].as_table()) {
    check_keys(*t, "[estimation]", {"enabled", "ckf_uses_estimate", "r2_min", "r2_max"});
    cfg.estimate_r2 = t->get("enabled") ? (*t)["enabled"].value_or(false) : cfg.estimate_r2;
    cfg.ckf_uses_estimate = (*t)["ckf_uses_estimate"].value_or(cfg.ckf_uses_estimate);
    const bool has_min = t->contains("r2_min"), has_max = t->contains("r2_max");
    if (has_min != has_max) throw domain_error("config: give both r2_min and r2_max or neither");
    if (has_min)
      cfg.r2_bounds = std::pair{detail::number(*t->get("r2_min"), "r2_min"), detail::number(*t->get("r2_max"), "r2_max")};
  }
  cfg.validate();
  return cfg;
}

inline bench::ExperimentConfig parse(std::string_view text, std::string_view source = "config") {
  try {
    return from_toml(toml::parse(text, source));
  } catch (const toml::parse_error& e) {
    throw domain_error("config: " + std::string(e.description()) + " (" + std::string(source) + ")");
  }
}

inline bench::ExperimentConfig load(const std::string& path) {
  try {
    return from_toml(toml::parse_file(path));
  } catch (const toml::parse_error& e) {
    throw domain_error("config: " + std::string(e.description()) + " (" + path + ")");
  }
}

}  // namespace ckf::config
