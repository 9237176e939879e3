/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
// exoctl: closed-loop exoskeleton NMPC workbench.
//
//   exoctl run --controller both --payload 2 --out out/
//   exoctl sweep --payloads 0,0.5,1,1.5,2
//   exoctl selftest

#include <exo/config.hpp>
#include <exo/csv_log.hpp>
#include <exo/metrics.hpp>
#include <exo/property_suite.hpp>
#include <exo/simulation.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>

namespace {

struct CommonOptions {
  std::optional<int> dof;
  std::optional<std::string> controller;
  std::optional<double> payload;
  std::optional<double> duration;
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool no_noise = false;
  bool ideal = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--dof", o.dof, "Limb degrees of freedom")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--controller", o.controller, "nmpc | msnmpc | both")
      ->check(CLI::IsMember({"nmpc", "msnmpc", "both"}));
  cmd->add_option("--payload", o.payload, "True payload on the robot shank [kg]");
  cmd->add_option("--duration", o.duration, "Simulated time [s]");
  cmd->add_option("--config", o.config_path, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-noise", o.no_noise, "Disable velocity and force sensor noise");
  cmd->add_flag("--ideal", o.ideal, "Disable every plant uncertainty (noise, wobble, disturbance, mass ramp)");
  cmd->add_option("--set", o.sets, "Override a config key, e.g. --set nmpc.r_d=0.2");
}

exo::SimConfig resolve(const CommonOptions& o) {
  exo::ConfigEntries entries;
  if (o.config_path) entries = exo::read_config_file(*o.config_path);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw exo::ConfigError(fmt::format("--set expects section.key=value, got '{}'", s));
    const std::string key = s.substr(0, eq);
    const auto& known = exo::known_config_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw exo::ConfigError(fmt::format("--set: unknown key '{}'", key));
    }
    entries[key] = s.substr(eq + 1);
  }
  if (o.dof) entries["run.dof"] = std::to_string(*o.dof);
  if (o.controller) entries["run.controller"] = *o.controller;
  if (o.payload) entries["run.payload"] = fmt::format("{}", *o.payload);
  if (o.duration) entries["run.duration"] = fmt::format("{}", *o.duration);
  if (o.out) entries["run.out"] = *o.out;
  if (o.threads) entries["run.threads"] = std::to_string(*o.threads);
  if (o.no_noise || o.ideal) entries["uncertainty.sensor_noise"] = "false";
  if (o.ideal) {
    entries["uncertainty.mass_wobble"] = "false";
    entries["uncertainty.disturbance"] = "false";
    entries["uncertainty.mass_ramp"] = "false";
  }
  return exo::build_config(entries);
}

void print_metrics(const exo::SimLog& log, const exo::Metrics& m) {
  fmt::print("{:>7}: RMS F1 {:8.4f} N  RMS F2 {:8.4f} N  delta_max", exo::to_string(log.controller), m.rms_F1,
             m.rms_F2);
  for (Eigen::Index i = 0; i < m.delta_max_deg.size(); ++i) fmt::print(" {:6.3f}", m.delta_max_deg[i]);
  fmt::print(" deg");
  if (m.mu_bar.size() > 0) {
    fmt::print("  mu_bar");
    for (Eigen::Index i = 0; i < m.mu_bar.size(); ++i) fmt::print(" {:6.2f}%", 100.0 * m.mu_bar[i]);
  }
  fmt::print("  step {:.3f}/{:.3f} ms (mean/max)  warnings {}\n", m.mean_step_ms, m.max_step_ms, log.solver_warnings);
  if (log.aborted) fmt::print("         ABORTED: {}\n", log.abort_reason);
}

int cmd_run(const CommonOptions& o) {
  const exo::SimConfig cfg = resolve(o);
  const auto logs = exo::run_configured(cfg);
  for (const auto& log : logs) {
    const std::string path = fmt::format("{}/run_{}_{}dof_{:.2f}kg.csv", cfg.out_dir, exo::to_string(log.controller),
                                         cfg.dof, cfg.true_payload);
    exo::write_text_file(path, exo::format_csv(log));
    print_metrics(log, exo::compute_metrics(log, cfg.settle));
    fmt::print("         wrote {}\n", path);
  }
  bool aborted = false;
  for (const auto& log : logs) aborted = aborted || log.aborted;
  return aborted ? 2 : 0;
}

int cmd_sweep(const CommonOptions& o, const std::vector<double>& payloads) {
  const exo::SimConfig cfg = resolve(o);
  const auto list = payloads.empty() ? exo::default_sweep_payloads() : payloads;
  const auto rows = exo::sweep_payloads(cfg, list);
  const std::string table = exo::format_sweep_csv(rows);
  const std::string path = fmt::format("{}/sweep_{}dof.csv", cfg.out_dir, cfg.dof);
  exo::write_text_file(path, table);
  std::fputs(table.c_str(), stdout);
  fmt::print("wrote {}\n", path);
  return 0;
}

int cmd_selftest(bool quick) {
  const auto results = exo::verify::run_property_suite(quick);
  int failed = 0;
  for (const auto& r : results) {
    fmt::print("[{}] {:<48} {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    if (!r.passed) ++failed;
  }
  fmt::print("{} of {} checks passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust (multi-stage) vs nominal NMPC for a lower-limb exoskeleton"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "Closed-loop simulation, one CSV per controller");
  add_common(run, run_opts);

  CommonOptions sweep_opts;
  std::vector<double> payloads;
  auto* sweep = app.add_subcommand("sweep", "Both controllers over a list of payloads");
  add_common(sweep, sweep_opts);
  sweep->add_option("--payloads", payloads, "Comma-separated payloads [kg]")->delimiter(',');

  bool quick = false;
  auto* selftest = app.add_subcommand("selftest", "Run the numerical invariant suite");
  selftest->add_flag("--quick", quick, "Smaller sample counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts, payloads);
    if (*selftest) return cmd_selftest(quick);
  } catch (const exo::ConfigError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
