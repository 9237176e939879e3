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

/// Column names in file order. 1-DOF logs drop the hip columns (and F1).
std::vector<std::string> csv_header(int dof, int scenarios);

/// Whole log as CSV text, fixed header, one row per control step.
std::string format_csv(const SimLog& log);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace exo
