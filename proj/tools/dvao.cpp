// dvao: command-line front end for the multi-reward advantage toolkit.
//
//   dvao verify      randomized certification of the advantage identities
//   dvao train       one training run, per-step metrics as CSV
//   dvao sweep       weight sweep over w1, final expected rewards as CSV
//   dvao sensitivity closed-form vs finite-difference sensitivities on a fixture
//   dvao report      summarize an artifact directory
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dvao/analysis.hpp"
#include "dvao/io.hpp"
#include "dvao/training.hpp"
#include "dvao/verify_suite.hpp"
#include "dvao/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommandSpec {
  std::string subcommand;
  std::string config_path;
  std::string out_dir;
  std::string in_dir;
  std::string group_path;
  std::optional<std::uint64_t> seed;
  std::string combiner;
  std::optional<std::size_t> cases;
  bool force = false;
  bool fault_sample_std = false;
};

fs::path resolve_output_dir(const CommandSpec& spec) {
  if (!spec.out_dir.empty()) return spec.out_dir;
  if (const char* root = std::getenv("DVAO_OUTPUT_ROOT"); root && *root) {
    return fs::path(root) / spec.subcommand;
  }
  return fs::path("dvao_out") / spec.subcommand;
}

/// Serializes every file write of one invocation and records what was written.
class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  /// Fails before anything is written if an artifact would be overwritten.
  void claim(const std::vector<std::string>& names) const {
    if (force_) return;
    for (const auto& name : names) {
      if (fs::exists(dir_ / name)) {
        throw UsageError((dir_ / name).string() + " exists; pass --force to overwrite");
      }
    }
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir_ / name).string());
    out << content;
    out.close();
    if (!out) throw IoError("failed writing " + (dir_ / name).string());
    written_.push_back(name);
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  bool force_;
  std::vector<std::string> written_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

dvao::ToolkitConfig load(const CommandSpec& spec) {
  if (spec.config_path.empty()) return {};
  return dvao::parse_config(read_file(spec.config_path));
}

std::string manifest(const CommandSpec& spec, const dvao::ToolkitConfig& cfg,
                     const std::vector<std::string>& artifacts) {
  const auto canonical = dvao::canonical_config(cfg);
  json m{{"toolkit_version", dvao::kVersion},
         {"report_schema_version", dvao::kReportSchemaVersion},
         {"csv_schema_version", dvao::kCsvSchemaVersion},
         {"command", spec.subcommand},
         {"config_hash", dvao::fnv1a_hex(canonical)},
         {"config", canonical},
         {"seeds",
          {{"train", cfg.train.seed}, {"noise", cfg.env.noise_seed}, {"verify", cfg.verify.seed}}},
         {"fault_sample_std", spec.fault_sample_std},
         {"artifacts", artifacts}};
  return m.dump(2) + "\n";
}

void finish(ArtifactWriter& out, const CommandSpec& spec, const dvao::ToolkitConfig& cfg) {
  auto artifacts = out.written();
  out.write("manifest.json", manifest(spec, cfg, artifacts));
}

int cmd_verify(const CommandSpec& spec) {
  auto cfg = load(spec);
  if (spec.seed) cfg.verify.seed = *spec.seed;
  if (spec.cases) cfg.verify.cases = *spec.cases;
  if (spec.fault_sample_std) cfg.verify.stats.convention = dvao::StdConvention::Sample;
  if (cfg.verify.cases == 0 || cfg.verify.sensitivity_cases == 0) {
    throw UsageError("case count must be positive");
  }
  ArtifactWriter out(resolve_output_dir(spec), spec.force);
  out.claim({"verify.json", "manifest.json"});
  const auto report = dvao::run_verification(cfg.verify);
  out.write("verify.json", dvao::to_json(report).dump(2) + "\n");
  finish(out, spec, cfg);
  for (const auto& s : report.suites) {
    std::cout << s.name << ": " << (s.passed() ? "PASS" : "FAIL") << " (" << s.cases << " cases";
    for (const auto& [check, count] : s.failures) {
      if (count) std::cout << ", " << check << " failed " << count;
    }
    std::cout << ", worst " << s.worst.value << ")\n";
  }
  return report.passed() ? kExitOk : kExitVerifyFailed;
}

void apply_train_overrides(const CommandSpec& spec, dvao::ToolkitConfig& cfg) {
  if (spec.seed) cfg.train.seed = *spec.seed;
  if (!spec.combiner.empty()) {
    const auto m = dvao::parse_method(spec.combiner);
    if (!m) throw UsageError("unknown combiner '" + spec.combiner + "'");
    cfg.train.combiner = *m;
    cfg.sweep_combiners = {*m};
  }
}

int cmd_train(const CommandSpec& spec) {
  auto cfg = load(spec);
  apply_train_overrides(spec, cfg);
  ArtifactWriter out(resolve_output_dir(spec), spec.force);
  out.claim({"train.csv", "manifest.json"});
  std::ostringstream csv;
  int status = kExitOk;
  try {
    const auto run = dvao::train(cfg.train, cfg.env);
    dvao::write_records_csv(csv, run.records, cfg.env.num_objectives());
  } catch (const dvao::TrainingDiverged& e) {
    dvao::write_records_csv(csv, e.records(), cfg.env.num_objectives());
    std::cerr << "dvao: " << e.what() << "\n";
    status = kExitVerifyFailed;
  }
  out.write("train.csv", csv.str());
  finish(out, spec, cfg);
  return status;
}

int cmd_sweep(const CommandSpec& spec) {
  auto cfg = load(spec);
  apply_train_overrides(spec, cfg);
  ArtifactWriter out(resolve_output_dir(spec), spec.force);
  out.claim({"sweep.csv", "manifest.json"});
  const auto rows = dvao::pareto_sweep(cfg.train, cfg.env, cfg.sweep_grid, cfg.sweep_combiners);
  std::ostringstream csv;
  dvao::write_sweep_csv(csv, rows);
  out.write("sweep.csv", csv.str());
  finish(out, spec, cfg);
  return kExitOk;
}

int cmd_sensitivity(const CommandSpec& spec) {
  auto cfg = load(spec);
  fs::path group_path = spec.group_path;
  if (group_path.empty() && !cfg.group_file.empty()) {
    group_path = fs::path(spec.config_path).parent_path() / cfg.group_file;
  }
  if (group_path.empty()) throw UsageError("sensitivity needs --group or group_file in the config");
  json fixture_json;
  try {
    fixture_json = json::parse(read_file(group_path));
  } catch (const json::parse_error& e) {
    throw UsageError("cannot parse " + group_path.string() + ": " + e.what());
  }
  const auto fixture = dvao::parse_group_fixture(fixture_json);

  std::vector<dvao::Method> methods{dvao::Method::AdvantageCombination, dvao::Method::DVAO};
  if (!spec.combiner.empty()) {
    const auto m = dvao::parse_method(spec.combiner);
    if (!m) throw UsageError("unknown combiner '" + spec.combiner + "'");
    methods = {*m};
  }

  ArtifactWriter out(resolve_output_dir(spec), spec.force);
  out.claim({"sensitivity.json", "manifest.json"});
  json reports = json::array();
  bool passed = true;
  double worst = 0.0;
  for (auto m : methods) {
    const auto rep = dvao::sensitivity_report(fixture.group, fixture.weights, m, cfg.verify.fd_step);
    passed = passed && rep.max_rel_error < dvao::kSensitivityRelTol;
    worst = std::max(worst, rep.max_rel_error);
    reports.push_back(dvao::to_json(rep));
  }
  json doc{{"schema_version", dvao::kReportSchemaVersion},
           {"toolkit_version", dvao::kVersion},
           {"kind", "sensitivity"},
           {"query_id", fixture.group.query_id()},
           {"group_size", fixture.group.group_size()},
           {"num_objectives", fixture.group.num_objectives()},
           {"fd_step", cfg.verify.fd_step},
           {"tolerance", dvao::kSensitivityRelTol},
           {"max_rel_error", worst},
           {"reports", reports},
           {"passed", passed}};
  out.write("sensitivity.json", doc.dump(2) + "\n");
  finish(out, spec, cfg);
  std::cout << "sensitivity: " << (passed ? "PASS" : "FAIL") << " (max_rel_error " << worst << ")\n";
  return passed ? kExitOk : kExitVerifyFailed;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

json summarize_train(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.size() < 2) return {{"steps", 0}};
  json last;
  for (std::size_t c = 0; c < rows[0].size() && c < rows.back().size(); ++c) {
    last[rows[0][c]] = std::stod(rows.back()[c]);
  }
  return {{"steps", rows.size() - 1}, {"final", last}};
}

json summarize_sweep(const fs::path& path) {
  const auto rows = read_csv(path);
  std::vector<dvao::SweepRow> parsed;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw UsageError("malformed sweep row " + std::to_string(i));
    const auto m = dvao::parse_method(r[0]);
    if (!m) throw UsageError("unknown combiner in sweep row " + std::to_string(i));
    parsed.push_back({*m, std::stod(r[1]), std::stod(r[2]), std::stod(r[3]), std::stoull(r[4])});
  }
  const auto front = dvao::pareto_nondominated(parsed);
  json points = json::array();
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    points.push_back({{"combiner", dvao::to_string(parsed[i].combiner)},
                      {"w1", parsed[i].w1},
                      {"exp_reward_1", parsed[i].exp_reward_1},
                      {"exp_reward_2", parsed[i].exp_reward_2},
                      {"pareto", static_cast<bool>(front[i])}});
  }
  return {{"rows", parsed.size()}, {"points", points}};
}

int cmd_report(const CommandSpec& spec) {
  if (spec.in_dir.empty()) throw UsageError("report needs --in <artifact directory>");
  const fs::path in = spec.in_dir;
  if (!fs::is_directory(in)) throw IoError(in.string() + " is not a directory");
  json doc{{"schema_version", dvao::kReportSchemaVersion},
           {"toolkit_version", dvao::kVersion},
           {"kind", "report"},
           {"source", in.string()}};
  if (fs::exists(in / "manifest.json")) doc["manifest"] = json::parse(read_file(in / "manifest.json"));
  if (fs::exists(in / "train.csv")) doc["train"] = summarize_train(in / "train.csv");
  if (fs::exists(in / "sweep.csv")) doc["sweep"] = summarize_sweep(in / "sweep.csv");
  for (const char* name : {"verify.json", "sensitivity.json"}) {
    if (fs::exists(in / name)) {
      const auto j = json::parse(read_file(in / name));
      doc[fs::path(name).stem().string()] = {{"passed", j.value("passed", false)}};
    }
  }
  CommandSpec out_spec = spec;
  if (out_spec.out_dir.empty()) out_spec.out_dir = spec.in_dir;
  ArtifactWriter out(resolve_output_dir(out_spec), spec.force);
  out.claim({"report.json"});
  out.write("report.json", doc.dump(2) + "\n");
  std::cout << (out.dir() / "report.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-reward group-relative advantage toolkit"};
  app.set_version_flag("--version", std::string(dvao::kVersion));
  app.require_subcommand(1, 1);

  CommandSpec spec;
  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("-c,--config", spec.config_path, "key = value config file");
    sub->add_option("-o,--out", spec.out_dir, "output directory (default $DVAO_OUTPUT_ROOT/<command>)");
    sub->add_flag("-f,--force", spec.force, "overwrite existing artifacts");
  };

  auto* verify = app.add_subcommand("verify", "run the randomized certification suites");
  add_common(verify);
  verify->add_option("--seed", spec.seed, "override the master seed");
  verify->add_option("--cases", spec.cases, "override the number of random groups");
  verify->add_flag("--fault-sample-std", spec.fault_sample_std,
                   "divide by G-1 instead of G (demonstrates that the checks catch it)");

  auto* train = app.add_subcommand("train", "train the tabular policy and log per-step metrics");
  add_common(train);
  train->add_option("--seed", spec.seed, "override the master seed");
  train->add_option("--combiner", spec.combiner, "rc, ac, gdpo or dvao");

  auto* sweep = app.add_subcommand("sweep", "sweep w1 over a grid and record final expected rewards");
  add_common(sweep);
  sweep->add_option("--seed", spec.seed, "override the master seed");
  sweep->add_option("--combiner", spec.combiner, "restrict the sweep to one combiner");

  auto* sens = app.add_subcommand("sensitivity", "check reward sensitivities on a stored group");
  add_common(sens);
  sens->add_option("--group", spec.group_path, "reward-group fixture (JSON)");
  sens->add_option("--combiner", spec.combiner, "ac or dvao (default both)");

  auto* report = app.add_subcommand("report", "summarize an artifact directory into report.json");
  add_common(report, false);
  report->add_option("-i,--in", spec.in_dir, "artifact directory to summarize")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spec.subcommand = app.get_subcommands().front()->get_name();

  try {
    if (spec.subcommand == "verify") return cmd_verify(spec);
    if (spec.subcommand == "train") return cmd_train(spec);
    if (spec.subcommand == "sweep") return cmd_sweep(spec);
    if (spec.subcommand == "sensitivity") return cmd_sensitivity(spec);
    return cmd_report(spec);
  } catch (const IoError& e) {
    std::cerr << "dvao: " << e.what() << "\n";
    return kExitIo;
  } catch (const dvao::ConfigError& e) {
    std::cerr << "dvao: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "dvao: " << e.what() << "\n";
    return kExitUsage;
  }
}
