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

#include <exo/config.hpp>

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace exo {

/// Deterministic uncertainty signals at time t.
struct UncertaintySample {
  double m_dis = 0.0;     // kg, added to every robot link mass
  double D = 0.0;         // N m, lumped disturbance on every robot joint
  double noise_qd = 0.0;  // rad/s, added to measured robot velocities
  double noise_F = 0.0;   // N, added to measured strap forces
};

UncertaintySample disturbance_models(double t, const UncertaintyFlags& flags);

/// Moving average over the most recent samples. Until the window is full the
/// missing slots hold the first sample.
class SensorFilter {
 public:
  explicit SensorFilter(std::size_t window);

  Vec push(const Vec& sample);
  [[nodiscard]] Vec value() const;
  [[nodiscard]] bool empty() const { return samples_.empty(); }

 private:
  std::size_t window_;
  std::deque<Vec> samples_;
};

struct LogRow {
  double t = 0.0;
  Vec qH, qdH, qR, qdR;
  Vec TR, TH;
  double F1 = 0.0;
  double F2 = 0.0;
  Vec qH_hat, qdH_hat;
  Vec mu;                   // empty for the non-robust controller
  std::vector<Vec> D_hat;   // per scenario
  Vec D_hat_blend;          // mu-weighted, per joint
  int sqp_iterations = 0;   // summed over scenarios
  double step_ms = 0.0;
};

struct SimLog {
  ControllerKind controller = ControllerKind::nmpc;
  int dof = 2;
  int scenarios = 0;
  std::vector<LogRow> rows;
  int solver_warnings = 0;
  int probability_underflows = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Test hook: overrides the plant's true payload as a function of time.
/// The controllers never see it.
struct PlantOverrides {
  std::function<double(double t)> payload;
};

/// Closed-loop run with one controller (nmpc or msnmpc).
SimLog run_simulation(const SimConfig& config, ControllerKind controller, const PlantOverrides& overrides = {});

/// One log per controller named in config.controller (two for "both").
std::vector<SimLog> run_configured(const SimConfig& config);

}  // namespace exo
