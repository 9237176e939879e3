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
#include <exo/metrics.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace exo {

Metrics compute_metrics(const SimLog& log, double settle) {
  Metrics m;
  const int dof = log.dof;
  m.delta_max_deg = Vec::Zero(dof);
  if (log.scenarios > 0) m.mu_bar = Vec::Zero(log.scenarios);
  double sum_F1 = 0.0;
  double sum_F2 = 0.0;
  double sum_ms = 0.0;
  std::size_t timed = 0;
  std::size_t mu_rows = 0;
  for (const LogRow& r : log.rows) {
    if (r.t <= settle) continue;
    ++m.samples;
    sum_F1 += r.F1 * r.F1;
    sum_F2 += r.F2 * r.F2;
    const Vec err = (r.qH - r.qR).cwiseAbs() * (180.0 / std::numbers::pi);
    m.delta_max_deg = m.delta_max_deg.cwiseMax(err);
    if (log.scenarios > 0 && r.mu.size() == log.scenarios) {
      m.mu_bar += r.mu;
      ++mu_rows;
    }
    if (r.TR.size() > 0) {
      sum_ms += r.step_ms;
      m.max_step_ms = std::max(m.max_step_ms, r.step_ms);
      ++timed;
    }
  }
  if (m.samples > 0) {
    m.rms_F1 = std::sqrt(sum_F1 / static_cast<double>(m.samples));
    m.rms_F2 = std::sqrt(sum_F2 / static_cast<double>(m.samples));
  }
  if (mu_rows > 0) m.mu_bar /= static_cast<double>(mu_rows);
  if (timed > 0) m.mean_step_ms = sum_ms / static_cast<double>(timed);
  return m;
}

std::vector<double> default_sweep_payloads() {
  std::vector<double> p;
  for (int i = 0; i <= 8; ++i) p.push_back(0.25 * i);
  return p;
}

std::vector<SweepRow> sweep_payloads(const SimConfig& base, const std::vector<double>& payloads) {
  std::vector<SweepRow> rows(payloads.size());
  auto run_case = [&](std::size_t i) {
    SimConfig c = base;
    c.true_payload = payloads[i];
    c.threads = 1;
    const SimLog ms = run_simulation(c, ControllerKind::msnmpc);
    const SimLog nm = run_simulation(c, ControllerKind::nmpc);
    rows[i].payload = payloads[i];
    rows[i].msnmpc = compute_metrics(ms, c.settle);
    rows[i].nmpc = compute_metrics(nm, c.settle);
    rows[i].msnmpc_warnings = ms.solver_warnings;
    rows[i].nmpc_warnings = nm.solver_warnings;
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, base.threads)), payloads.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < payloads.size(); ++i) run_case(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < payloads.size(); i += workers) run_case(i);
      });
    }
  }
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out;
  if (rows.empty()) return out;
  const auto dof = rows.front().msnmpc.delta_max_deg.size();
  const auto n_mu = rows.front().msnmpc.mu_bar.size();
  out += "payload,ms_rms_F1,ms_rms_F2,nmpc_rms_F1,nmpc_rms_F2";
  const char* joints[] = {"hip", "knee"};
  for (Eigen::Index d = 0; d < dof; ++d) out += fmt::format(",ms_delta_max_{}", dof == 1 ? "knee" : joints[d]);
  for (Eigen::Index d = 0; d < dof; ++d) out += fmt::format(",nmpc_delta_max_{}", dof == 1 ? "knee" : joints[d]);
  for (Eigen::Index i = 0; i < n_mu; ++i) out += fmt::format(",mu_bar_{}", i + 1);
  out += ",ms_mean_step_ms,ms_max_step_ms,nmpc_mean_step_ms,nmpc_max_step_ms\n";
  for (const SweepRow& r : rows) {
    out += fmt::format("{:.2f},{:.6g},{:.6g},{:.6g},{:.6g}", r.payload, r.msnmpc.rms_F1, r.msnmpc.rms_F2, r.nmpc.rms_F1,
                       r.nmpc.rms_F2);
    for (Eigen::Index d = 0; d < dof; ++d) out += fmt::format(",{:.6g}", r.msnmpc.delta_max_deg[d]);
    for (Eigen::Index d = 0; d < dof; ++d) out += fmt::format(",{:.6g}", r.nmpc.delta_max_deg[d]);
    for (Eigen::Index i = 0; i < n_mu; ++i) out += fmt::format(",{:.6g}", 100.0 * r.msnmpc.mu_bar[i]);
    out += fmt::format(",{:.6g},{:.6g},{:.6g},{:.6g}\n", r.msnmpc.mean_step_ms, r.msnmpc.max_step_ms,
                       r.nmpc.mean_step_ms, r.nmpc.max_step_ms);
  }
  return out;
}

}  // namespace exo
