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
#pragma once

#include <exo/simulation.hpp>

#include <string>
#include <vector>

namespace exo {

struct Metrics {
  double rms_F1 = 0.0;  // N
  double rms_F2 = 0.0;  // N
  Vec delta_max_deg;    // max |q_H - q_R| per joint
  Vec mu_bar;           // time-averaged scenario probabilities (fractions); empty for nmpc
  double mean_step_ms = 0.0;
  double max_step_ms = 0.0;
  std::size_t samples = 0;
};

/// Statistics over rows with t > settle.
Metrics compute_metrics(const SimLog& log, double settle);

struct SweepRow {
  double payload = 0.0;
  Metrics msnmpc;
  Metrics nmpc;
  int msnmpc_warnings = 0;
  int nmpc_warnings = 0;
};

/// Default payload list: 0 to 2 kg in 0.25 kg steps.
std::vector<double> default_sweep_payloads();

/// Runs both controllers at every payload. Cases are independent and run on
/// up to config.threads workers.
std::vector<SweepRow> sweep_payloads(const SimConfig& base, const std::vector<double>& payloads);

/// Summary table: one row per payload, RMS forces, peak tracking errors,
/// average probabilities and step timings.
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace exo
