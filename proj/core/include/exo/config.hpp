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

#include <exo/dynamics.hpp>
#include <exo/human_sim.hpp>
#include <exo/interaction.hpp>
#include <exo/msnmpc.hpp>
#include <exo/nmpc.hpp>

#include <map>
#include <optional>
#include <string>

namespace exo {

enum class ControllerKind { nmpc, msnmpc, both };

std::string_view to_string(ControllerKind k);
ControllerKind parse_controller(std::string_view s);

/// Which of the plant-side uncertainties are switched on.
struct UncertaintyFlags {
  bool mass_wobble = true;   // sinusoidal error on robot link masses
  bool disturbance = true;   // lumped joint disturbance D
  bool sensor_noise = true;  // velocity and force sensor noise
  bool mass_ramp = true;     // human body mass ramps over the run

  static UncertaintyFlags none() { return {false, false, false, false}; }
};

struct HumanConfig {
  double mass_start = 60.0;  // kg
  double mass_end = 85.0;    // kg, reached at the end of the run when the ramp is on
  double height = 1.75;      // m
  HumanGains gains;
  TrajectoryProfile profile;
};

/// Everything one closed-loop run needs. Controllers only ever see robot (not
/// plant) parameters, the hypotheses, and sensor readings.
struct SimConfig {
  int dof = 2;
  double duration = 30.0;  // s
  double dt = 0.01;        // s, shared by plant and controllers
  ControllerKind controller = ControllerKind::both;
  double true_payload = 2.0;  // kg
  double nmpc_model_payload = 0.0;  // kg assumed by the non-robust controller's model

  LimbModel robot;
  HumanConfig human;
  StrapConfig straps;
  EstimatorGains estimator;
  MsSettings ms;  // ms.nmpc is also the non-robust controller's config

  UncertaintyFlags uncertainty;
  int filter_window = 5;
  int sensor_substeps = 10;  // sensor samples (and plant RK4 sub-steps) per control period
  std::optional<double> force_saturation;  // N, symmetric
  double settle = 2.0;                     // s, excluded from metrics
  bool record_timing = true;
  std::string out_dir = "out";
  int threads = 1;

  static SimConfig defaults(int dof);
  void validate() const;
  [[nodiscard]] int steps() const;
};

/// Flat "section.key" -> value overrides, as read from a config file or the CLI.
using ConfigEntries = std::map<std::string, std::string>;

/// Parse an INI-style file with sections [robot], [human], [straps], [nmpc],
/// [msnmpc], [uncertainty], [run]. Unknown sections or keys are errors.
ConfigEntries read_config_file(const std::string& path);
ConfigEntries parse_config_text(const std::string& text);

/// Defaults for the resolved dof, then entries applied in order.
SimConfig build_config(const ConfigEntries& entries);

/// Every key the parser accepts, as "section.key".
const std::vector<std::string>& known_config_keys();

}  // namespace exo
