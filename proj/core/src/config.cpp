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
#include <exo/config.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace exo {

std::string_view to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::nmpc: return "nmpc";
    case ControllerKind::msnmpc: return "msnmpc";
    case ControllerKind::both: return "both";
  }
  return "unknown";
}

ControllerKind parse_controller(std::string_view s) {
  if (s == "nmpc") return ControllerKind::nmpc;
  if (s == "msnmpc") return ControllerKind::msnmpc;
  if (s == "both") return ControllerKind::both;
  throw ConfigError(fmt::format("unknown controller '{}', expected nmpc|msnmpc|both", s));
}

SimConfig SimConfig::defaults(int dof) {
  SimConfig c;
  c.dof = dof;
  c.robot = LimbModel::robot_default(dof);
  c.human.gains = HumanGains::defaults(dof);
  c.human.profile = TrajectoryProfile::swing_default(dof);
  c.estimator = EstimatorGains::defaults(dof);
  c.ms.nmpc.dt = c.dt;
  c.ms.nmpc.dT_max = 1000.0 * c.dt;
  if (dof == 1) {
    // Single-joint stand: fixed 60 kg user, no ramp.
    c.uncertainty.mass_ramp = false;
  }
  return c;
}

int SimConfig::steps() const { return static_cast<int>(std::llround(duration / dt)); }

void SimConfig::validate() const {
  if (dof != 1 && dof != 2) throw ConfigError("run.dof must be 1 or 2");
  if (!(dt > 0.0)) throw ConfigError("run.dt must be positive");
  if (!(duration >= 10.0 * dt)) throw ConfigError("run.duration must be at least 10 time steps");
  if (!(true_payload >= 0.0)) throw ConfigError("run.payload must be non-negative");
  if (!(nmpc_model_payload >= 0.0)) throw ConfigError("nmpc.model_payload must be non-negative");
  if (robot.dof != dof) throw ConfigError("robot model dof does not match run.dof");
  robot.validate();
  straps.validate();
  estimator.validate(dof);
  ms.validate();
  if (std::abs(ms.nmpc.dt - dt) > 1e-15) throw ConfigError("controller dt must equal run.dt");
  if (filter_window < 1) throw ConfigError("run.filter_window must be at least 1");
  if (sensor_substeps < 1) throw ConfigError("run.sensor_substeps must be at least 1");
  if (force_saturation && !(*force_saturation > 0.0)) throw ConfigError("straps.force_saturation must be positive");
  if (settle < 0.0 || settle >= duration) throw ConfigError("run.settle must lie in [0, duration)");
  if (threads < 1) throw ConfigError("run.threads must be at least 1");
  if (human.gains.Kp.size() != dof || human.gains.Kd.size() != dof) throw ConfigError("human gains must have dof entries");
  if ((human.gains.Kp.array() <= 0.0).any() || (human.gains.Kd.array() <= 0.0).any()) {
    throw ConfigError("human gains must be positive");
  }
  if (static_cast<int>(human.profile.joints.size()) != dof) throw ConfigError("trajectory profile must have dof joints");
  if (!(human.mass_start > 0.0 && human.mass_end > 0.0 && human.height > 0.0)) {
    throw ConfigError("human mass and height must be positive");
  }
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
  }
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, v));
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: expected a comma-separated list", key));
  return out;
}

using Setter = std::function<void(SimConfig&, const std::string& key, const std::string& value)>;

LinkParams& link(SimConfig& c, bool thigh) {
  if (c.dof == 1) {
    if (thigh) {
      static LinkParams unused;  // 1-DOF stand has no thigh; accept and ignore
      return unused;
    }
    return c.robot.links[0];
  }
  return c.robot.links[thigh ? 0 : 1];
}

JointProfile* joint_profile(SimConfig& c, bool hip) {
  if (c.dof == 1) return hip ? nullptr : &c.human.profile.joints[0];
  return &c.human.profile.joints[hip ? 0 : 1];
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [](auto apply) {
      return Setter([apply](SimConfig& c, const std::string& k, const std::string& v) { apply(c, to_double(k, v)); });
    };
    // [robot]
    t["robot.thigh_mass"] = num([](SimConfig& c, double v) { link(c, true).mass = v; });
    t["robot.thigh_length"] = num([](SimConfig& c, double v) { link(c, true).length = v; });
    t["robot.thigh_com"] = num([](SimConfig& c, double v) { link(c, true).com_distance = v; });
    t["robot.thigh_inertia"] = num([](SimConfig& c, double v) { link(c, true).inertia_com = v; });
    t["robot.shank_mass"] = num([](SimConfig& c, double v) { link(c, false).mass = v; });
    t["robot.shank_length"] = num([](SimConfig& c, double v) { link(c, false).length = v; });
    t["robot.shank_com"] = num([](SimConfig& c, double v) { link(c, false).com_distance = v; });
    t["robot.shank_inertia"] = num([](SimConfig& c, double v) { link(c, false).inertia_com = v; });
    t["robot.k_f1"] = num([](SimConfig& c, double v) { c.robot.viscous_friction.setConstant(v); });
    t["robot.k_f2"] = num([](SimConfig& c, double v) { c.robot.coulomb_friction.setConstant(v); });
    t["robot.gravity"] = num([](SimConfig& c, double v) { c.robot.gravity = v; });
    // [human]
    t["human.mass_start"] = num([](SimConfig& c, double v) { c.human.mass_start = v; });
    t["human.mass_end"] = num([](SimConfig& c, double v) { c.human.mass_end = v; });
    t["human.height"] = num([](SimConfig& c, double v) { c.human.height = v; });
    t["human.Kp"] = num([](SimConfig& c, double v) { c.human.gains.Kp.setConstant(v); });
    t["human.Kd"] = num([](SimConfig& c, double v) { c.human.gains.Kd.setConstant(v); });
    for (const bool hip : {true, false}) {
      const std::string p = hip ? "human.hip_" : "human.knee_";
      t[p + "mean"] = num([hip](SimConfig& c, double v) { if (auto* j = joint_profile(c, hip)) j->mean = v; });
      t[p + "amplitude"] = num([hip](SimConfig& c, double v) { if (auto* j = joint_profile(c, hip)) j->amplitude = v; });
      t[p + "frequency"] = num([hip](SimConfig& c, double v) { if (auto* j = joint_profile(c, hip)) j->frequency = v; });
      t[p + "phase"] = num([hip](SimConfig& c, double v) { if (auto* j = joint_profile(c, hip)) j->phase = v; });
    }
    auto all_joints = [](auto apply) {
      return Setter([apply](SimConfig& c, const std::string& k, const std::string& v) {
        const double d = to_double(k, v);
        for (auto& j : c.human.profile.joints) apply(j, d);
      });
    };
    t["human.amp_depth"] = all_joints([](JointProfile& j, double v) { j.amp_depth = v; });
    t["human.amp_rate"] = all_joints([](JointProfile& j, double v) { j.amp_rate = v; });
    t["human.freq_depth"] = all_joints([](JointProfile& j, double v) { j.freq_depth = v; });
    t["human.freq_rate"] = all_joints([](JointProfile& j, double v) { j.freq_rate = v; });
    // [straps]
    t["straps.k_s"] = num([](SimConfig& c, double v) { c.straps.k_s = v; });
    t["straps.c_s"] = num([](SimConfig& c, double v) { c.straps.c_s = v; });
    t["straps.L_s1"] = num([](SimConfig& c, double v) { c.straps.L_s1 = v; });
    t["straps.L_s2"] = num([](SimConfig& c, double v) { c.straps.L_s2 = v; });
    t["straps.K_1"] = num([](SimConfig& c, double v) { c.estimator.K1.setConstant(v); });
    t["straps.K_2"] = num([](SimConfig& c, double v) { c.estimator.K2.setConstant(v); });
    t["straps.force_saturation"] = [](SimConfig& c, const std::string& k, const std::string& v) {
      if (v == "off" || v == "none") {
        c.force_saturation.reset();
      } else {
        c.force_saturation = to_double(k, v);
      }
    };
    // [nmpc]
    t["nmpc.model_payload"] = num([](SimConfig& c, double v) { c.nmpc_model_payload = v; });
    t["nmpc.N_p"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.ms.nmpc.N_p = to_int(k, v); };
    t["nmpc.N_c"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.ms.nmpc.N_c = to_int(k, v); };
    t["nmpc.r_d"] = num([](SimConfig& c, double v) { c.ms.nmpc.r_d = v; });
    t["nmpc.r_t"] = num([](SimConfig& c, double v) { c.ms.nmpc.r_t = v; });
    t["nmpc.T_max"] = num([](SimConfig& c, double v) { c.ms.nmpc.T_max = v; });
    t["nmpc.dT_max_rate"] = num([](SimConfig& c, double v) { c.ms.nmpc.dT_max = v * c.dt; });
    t["nmpc.objective_scale"] = num([](SimConfig& c, double v) { c.ms.nmpc.objective_scale = v; });
    t["nmpc.warm_start"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.ms.nmpc.warm_start = to_bool(k, v); };
    t["nmpc.max_iterations"] = [](SimConfig& c, const std::string& k, const std::string& v) {
      c.ms.nmpc.sqp.max_iterations = to_int(k, v);
    };
    t["nmpc.kkt_tolerance"] = num([](SimConfig& c, double v) { c.ms.nmpc.sqp.kkt_tolerance = v; });
    t["nmpc.step_tolerance"] = num([](SimConfig& c, double v) { c.ms.nmpc.sqp.step_tolerance = v; });
    t["nmpc.fd_step"] = num([](SimConfig& c, double v) { c.ms.nmpc.sqp.fd_step = v; });
    // [msnmpc]
    t["msnmpc.N"] = [](SimConfig& c, const std::string& k, const std::string& v) {
      const int n = to_int(k, v);
      if (n != static_cast<int>(c.ms.hypotheses.size())) {
        throw ConfigError(fmt::format("{}: N = {} but {} hypotheses are configured", k, n, c.ms.hypotheses.size()));
      }
    };
    t["msnmpc.hypotheses"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.ms.hypotheses = to_list(k, v); };
    t["msnmpc.c_1"] = num([](SimConfig& c, double v) { c.ms.c1 = v; });
    t["msnmpc.mu_floor"] = num([](SimConfig& c, double v) { c.ms.mu_floor = v; });
    t["msnmpc.ekf_q_pos"] = num([](SimConfig& c, double v) { c.ms.ekf.q_pos = v; });
    t["msnmpc.ekf_q_vel"] = num([](SimConfig& c, double v) { c.ms.ekf.q_vel = v; });
    t["msnmpc.ekf_q_dist"] = num([](SimConfig& c, double v) { c.ms.ekf.q_dist = v; });
    t["msnmpc.ekf_r_pos"] = num([](SimConfig& c, double v) { c.ms.ekf.r_pos = v; });
    t["msnmpc.ekf_r_vel"] = num([](SimConfig& c, double v) { c.ms.ekf.r_vel = v; });
    t["msnmpc.ekf_p0"] = num([](SimConfig& c, double v) { c.ms.ekf.p0 = v; });
    t["msnmpc.use_disturbance_estimate"] = [](SimConfig& c, const std::string& k, const std::string& v) {
      c.ms.use_disturbance_estimate = to_bool(k, v);
    };
    // [uncertainty]
    t["uncertainty.mass_wobble"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.uncertainty.mass_wobble = to_bool(k, v); };
    t["uncertainty.disturbance"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.uncertainty.disturbance = to_bool(k, v); };
    t["uncertainty.sensor_noise"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.uncertainty.sensor_noise = to_bool(k, v); };
    t["uncertainty.mass_ramp"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.uncertainty.mass_ramp = to_bool(k, v); };
    // [run]; dof and dt are resolved before the rest
    t["run.dof"] = [](SimConfig&, const std::string&, const std::string&) {};
    t["run.dt"] = [](SimConfig&, const std::string&, const std::string&) {};
    t["run.duration"] = num([](SimConfig& c, double v) { c.duration = v; });
    t["run.controller"] = [](SimConfig& c, const std::string&, const std::string& v) { c.controller = parse_controller(v); };
    t["run.payload"] = num([](SimConfig& c, double v) { c.true_payload = v; });
    t["run.filter_window"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.filter_window = to_int(k, v); };
    t["run.sensor_substeps"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.sensor_substeps = to_int(k, v); };
    t["run.settle"] = num([](SimConfig& c, double v) { c.settle = v; });
    t["run.threads"] = [](SimConfig& c, const std::string& k, const std::string& v) {
      c.threads = to_int(k, v);
      c.ms.threads = c.threads;
    };
    t["run.record_timing"] = [](SimConfig& c, const std::string& k, const std::string& v) { c.record_timing = to_bool(k, v); };
    t["run.out"] = [](SimConfig& c, const std::string&, const std::string& v) { c.out_dir = v; };
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

ConfigEntries parse_config_text(const std::string& text) {
  // '#' comments are stripped here; the INI reader handles ';'.
  std::stringstream cleaned;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    cleaned << line << '\n';
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config parse error: {}", e.message()));
  }
  static const std::vector<std::string> sections{"robot", "human", "straps", "nmpc", "msnmpc", "uncertainty", "run"};
  ConfigEntries out;
  for (const auto& [section, body] : tree) {
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
      if (body.empty()) throw ConfigError(fmt::format("config: key '{}' outside of any section", section));
      throw ConfigError(fmt::format("config: unknown section [{}]", section));
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!setters().contains(full)) throw ConfigError(fmt::format("config: unknown key '{}' in [{}]", key, section));
      out[full] = value.get_value<std::string>();
    }
  }
  return out;
}

ConfigEntries read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

SimConfig build_config(const ConfigEntries& entries) {
  int dof = 2;
  if (auto it = entries.find("run.dof"); it != entries.end()) dof = to_int(it->first, it->second);
  if (dof != 1 && dof != 2) throw ConfigError(fmt::format("run.dof must be 1 or 2, got {}", dof));
  SimConfig c = SimConfig::defaults(dof);
  if (auto it = entries.find("run.dt"); it != entries.end()) {
    c.dt = to_double(it->first, it->second);
    if (!(c.dt > 0.0)) throw ConfigError("run.dt must be positive");
    c.ms.nmpc.dt = c.dt;
    c.ms.nmpc.dT_max = 1000.0 * c.dt;
  }
  // Hypotheses must be known before N is checked; the map is sorted, so
  // apply them first explicitly.
  if (auto it = entries.find("msnmpc.hypotheses"); it != entries.end()) setters().at(it->first)(c, it->first, it->second);
  for (const auto& [key, value] : entries) {
    const auto s = setters().find(key);
    if (s == setters().end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    s->second(c, key, value);
  }
  c.validate();
  return c;
}

}  // namespace exo
