#pragma once

// Flat key = value configuration, CSV writers, reward-group fixtures and run
// manifests.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvao/combiners.hpp"
#include "dvao/environment.hpp"
#include "dvao/training.hpp"
#include "dvao/verify_suite.hpp"
#include "dvao/version.hpp"

namespace dvao {

/// Malformed or unknown configuration entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Everything a CLI invocation can be configured with.
struct ToolkitConfig {
  TrainConfig train;
  Environment env;
  VerifyConfig verify;
  std::vector<double> sweep_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<Method> sweep_combiners{Method::RewardCombination, Method::AdvantageCombination,
                                      Method::GDPO, Method::DVAO};
  /// Reward-group fixture for the sensitivity command, relative to the config file.
  std::string group_file;
};

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

inline Method parse_method_value(const std::string& key, const std::string& v) {
  const auto m = parse_method(v);
  if (!m) throw ConfigError(key, "unknown combiner '" + v + "' (expected rc, ac, gdpo or dvao)");
  return *m;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(xs[i]);
    } else if constexpr (std::is_same_v<T, Method>) {
      out += to_string(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Duplicate keys are errors.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(body, "line " + std::to_string(lineno) + " is not 'key = value'");
    }
    auto key = detail::trim(std::string_view(body).substr(0, eq));
    auto value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + " has an empty key");
    if (kv.contains(key)) throw ConfigError(key, "duplicate key");
    kv.emplace(std::move(key), std::move(value));
  }
  return kv;
}

/// Applies entries over the defaults in `cfg`; unknown keys are rejected.
inline void apply_key_values(ToolkitConfig& cfg, const std::map<std::string, std::string>& kv) {
  using namespace detail;
  for (const auto& [key, v] : kv) {
    auto& t = cfg.train;
    if (key == "combiner") t.combiner = parse_method_value(key, v);
    else if (key == "weights") t.weights = parse_doubles(key, v);
    else if (key == "group_size") t.group_size = parse_uint(key, v);
    else if (key == "clip_epsilon") t.clip_epsilon = parse_double(key, v);
    else if (key == "learning_rate") t.learning_rate = parse_double(key, v);
    else if (key == "steps") t.steps = parse_uint(key, v);
    else if (key == "queries") {
      t.queries.clear();
      for (const auto& item : split_list(v)) t.queries.push_back(parse_uint(key, item));
      if (t.queries.empty()) throw ConfigError(key, "empty list");
    }
    else if (key == "seed") t.seed = parse_uint(key, v);
    else if (key == "epochs") t.epochs = parse_uint(key, v);
    else if (key == "vocab_size") t.vocab_size = parse_uint(key, v);
    else if (key == "max_length") t.max_length = parse_uint(key, v);
    else if (key == "init_token_logit") t.init_token_logit = parse_double(key, v);
    else if (key == "wall_clock") t.wall_clock = parse_bool(key, v);
    else if (key == "env") {
      const auto f = parse_env_family(v);
      if (!f) throw ConfigError(key, "unknown environment '" + v + "'");
      cfg.env.family = *f;
    }
    else if (key == "target_symbol") cfg.env.target_symbol = parse_uint(key, v);
    else if (key == "length_target") cfg.env.length_target = parse_uint(key, v);
    else if (key == "noise_scale") cfg.env.noise_scale = parse_double(key, v);
    else if (key == "noise_seed") cfg.env.noise_seed = parse_uint(key, v);
    else if (key == "constant_rewards") cfg.env.constant_rewards = parse_doubles(key, v);
    else if (key == "verify_seed") cfg.verify.seed = parse_uint(key, v);
    else if (key == "cases") cfg.verify.cases = parse_uint(key, v);
    else if (key == "sensitivity_cases") cfg.verify.sensitivity_cases = parse_uint(key, v);
    else if (key == "fd_step") cfg.verify.fd_step = parse_double(key, v);
    else if (key == "sensitivity_min_std") cfg.verify.sensitivity_min_std = parse_double(key, v);
    else if (key == "sweep_grid") cfg.sweep_grid = parse_doubles(key, v);
    else if (key == "sweep_combiners") {
      cfg.sweep_combiners.clear();
      for (const auto& item : split_list(v)) cfg.sweep_combiners.push_back(parse_method_value(key, item));
      if (cfg.sweep_combiners.empty()) throw ConfigError(key, "empty list");
    }
    else if (key == "group_file") cfg.group_file = v;
    else throw ConfigError(key, "unknown key");
  }
}

inline ToolkitConfig parse_config(std::string_view text) {
  ToolkitConfig cfg;
  apply_key_values(cfg, parse_key_values(text));
  return cfg;
}

inline ToolkitConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its resolved value, sorted; parse_config inverts it.
inline std::string canonical_config(const ToolkitConfig& cfg) {
  using detail::join;
  const auto& t = cfg.train;
  std::map<std::string, std::string> kv{
      {"combiner", std::string(to_string(t.combiner))},
      {"weights", join(t.weights)},
      {"group_size", std::to_string(t.group_size)},
      {"clip_epsilon", format_double(t.clip_epsilon)},
      {"learning_rate", format_double(t.learning_rate)},
      {"steps", std::to_string(t.steps)},
      {"queries", join(t.queries)},
      {"seed", std::to_string(t.seed)},
      {"epochs", std::to_string(t.epochs)},
      {"vocab_size", std::to_string(t.vocab_size)},
      {"max_length", std::to_string(t.max_length)},
      {"init_token_logit", format_double(t.init_token_logit)},
      {"wall_clock", t.wall_clock ? "true" : "false"},
      {"env", std::string(to_string(cfg.env.family))},
      {"target_symbol", std::to_string(cfg.env.target_symbol)},
      {"length_target", std::to_string(cfg.env.length_target)},
      {"noise_scale", format_double(cfg.env.noise_scale)},
      {"noise_seed", std::to_string(cfg.env.noise_seed)},
      {"constant_rewards", join(cfg.env.constant_rewards)},
      {"verify_seed", std::to_string(cfg.verify.seed)},
      {"cases", std::to_string(cfg.verify.cases)},
      {"sensitivity_cases", std::to_string(cfg.verify.sensitivity_cases)},
      {"fd_step", format_double(cfg.verify.fd_step)},
      {"sensitivity_min_std", format_double(cfg.verify.sensitivity_min_std)},
      {"sweep_grid", join(cfg.sweep_grid)},
      {"sweep_combiners", join(cfg.sweep_combiners)},
      {"group_file", cfg.group_file},
  };
  std::string out;
  for (const auto& [k, v] : kv) {
    if (v.empty()) continue;
    out += k + " = " + v + "\n";
  }
  return out;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string records_csv_header(std::size_t num_objectives) {
  std::string h = "step";
  for (std::size_t k = 0; k < num_objectives; ++k) {
    const auto idx = std::to_string(k + 1);
    h += ",reward" + idx + "_mean,reward" + idx + "_std,reward" + idx + "_expected";
  }
  h += ",mean_abs_advantage,paired_abs_rc,paired_abs_dvao,mean_length,surrogate,millis";
  return h;
}

inline void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records,
                              std::size_t num_objectives) {
  out << records_csv_header(num_objectives) << '\n';
  for (const auto& r : records) {
    out << r.step;
    for (std::size_t k = 0; k < num_objectives; ++k) {
      out << ',' << format_double(r.reward_mean[k]) << ',' << format_double(r.reward_std[k]) << ','
          << format_double(r.expected_reward[k]);
    }
    out << ',' << format_double(r.mean_abs_advantage) << ',' << format_double(r.paired_abs_rc) << ','
        << format_double(r.paired_abs_dvao) << ',' << format_double(r.mean_length) << ','
        << format_double(r.surrogate) << ',' << format_double(r.millis) << '\n';
  }
}

inline constexpr std::string_view kSweepCsvHeader = "combiner,w1,exp_reward_1,exp_reward_2,seed";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.combiner) << ',' << format_double(r.w1) << ',' << format_double(r.exp_reward_1)
        << ',' << format_double(r.exp_reward_2) << ',' << r.seed << '\n';
  }
}

/// {"query_id": ..., "rewards": [[r_11, ..., r_1n], ...], "weights": [...]}
struct GroupFixture {
  RewardGroup group;
  WeightVector weights;
};

inline GroupFixture parse_group_fixture(const nlohmann::json& j) {
  try {
    auto rows = j.at("rewards").get<std::vector<std::vector<double>>>();
    auto group = RewardGroup::from_rows(j.value("query_id", std::string("fixture")), rows);
    auto weights = j.contains("weights") ? WeightVector::create(j.at("weights").get<std::vector<double>>())
                                         : WeightVector::uniform(group.num_objectives());
    check_weights(group, weights);
    return {std::move(group), std::move(weights)};
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed reward-group fixture: ") + e.what());
  }
}

inline nlohmann::json to_json(const SensitivityReport& r) {
  auto matrix = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < m.rows(); ++j) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t k = 0; k < m.cols(); ++k) {
        const double x = m(j, k);
        row.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
      }
      rows.push_back(row);
    }
    return rows;
  };
  return {{"method", to_string(r.method)},
          {"analytic", matrix(r.analytic)},
          {"numeric", matrix(r.numeric)},
          {"max_rel_error", r.max_rel_error},
          {"worst", {{"rollout", r.worst_row}, {"objective", r.worst_col}}},
          {"passed", r.max_rel_error < kSensitivityRelTol}};
}

}  // namespace dvao
