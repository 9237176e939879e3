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
#include <exo/csv_log.hpp>

#include <fmt/format.h>

#include <filesystem>
#include <fstream>

namespace exo {

std::vector<std::string> csv_header(int dof, int scenarios) {
  std::vector<std::string> h{"t"};
  auto joint_cols = [&](const std::string& stem) {
    if (dof == 2) h.push_back(stem + "_hip");
    h.push_back(stem + "_knee");
  };
  joint_cols("qH");
  joint_cols("qdH");
  joint_cols("qR");
  joint_cols("qdR");
  joint_cols("TR");
  if (dof == 2) h.emplace_back("F1");
  h.emplace_back("F2");
  joint_cols("qhatH");
  for (int i = 1; i <= scenarios; ++i) h.push_back(fmt::format("mu_{}", i));
  for (int i = 1; i <= dof; ++i) h.push_back(fmt::format("Dhat_{}", i));
  h.emplace_back("sqp_iters");
  h.emplace_back("step_ms");
  return h;
}

std::string format_csv(const SimLog& log) {
  const auto header = csv_header(log.dof, log.scenarios);
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out += ',';
    out += header[i];
  }
  out += '\n';
  auto put = [&out](double v) { fmt::format_to(std::back_inserter(out), ",{:.12g}", v); };
  auto put_vec = [&](const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v[i]);
  };
  for (const LogRow& r : log.rows) {
    fmt::format_to(std::back_inserter(out), "{:.4f}", r.t);
    put_vec(r.qH);
    put_vec(r.qdH);
    put_vec(r.qR);
    put_vec(r.qdR);
    put_vec(r.TR);
    if (log.dof == 2) put(r.F1);
    put(r.F2);
    put_vec(r.qH_hat);
    if (log.scenarios > 0) {
      if (r.mu.size() == log.scenarios) {
        put_vec(r.mu);
      } else {
        for (int i = 0; i < log.scenarios; ++i) out += ",";
      }
    }
    put_vec(r.D_hat_blend);
    fmt::format_to(std::back_inserter(out), ",{},{:.6f}\n", r.sqp_iterations, r.step_ms);
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError(fmt::format("cannot write '{}'", path));
  f << text;
}

}  // namespace exo
