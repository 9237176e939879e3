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

#include <exo/types.hpp>

#include <type_traits>
#include <utility>

namespace exo {

/// One classic fourth-order Runge-Kutta step of x' = f(t, x).
/// Throws NumericalError when any stage evaluates to a non-finite derivative.
template <class Derivative>
Vec rk4_step(Derivative&& f, double t, const Vec& x, double dt) {
  if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be positive");
  const double h2 = 0.5 * dt;
  const Vec k1 = f(t, x);
  if (!k1.allFinite()) throw NumericalError("rk4_step: non-finite derivative");
  const Vec k2 = f(t + h2, Vec(x + h2 * k1));
  if (!k2.allFinite()) throw NumericalError("rk4_step: non-finite derivative");
  const Vec k3 = f(t + h2, Vec(x + h2 * k2));
  if (!k3.allFinite()) throw NumericalError("rk4_step: non-finite derivative");
  const Vec k4 = f(t + dt, Vec(x + dt * k3));
  if (!k4.allFinite()) throw NumericalError("rk4_step: non-finite derivative");
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Autonomous overload, x' = f(x).
template <class Derivative>
  requires std::is_invocable_r_v<Vec, Derivative, const Vec&>
Vec rk4_step(Derivative&& f, const Vec& x, double dt) {
  return rk4_step([&f](double, const Vec& y) -> Vec { return f(y); }, 0.0, x, dt);
}

}  // namespace exo
