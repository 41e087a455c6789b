/*
 Copyright 2026 The zsgames Authors

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

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace zsg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Malformed inputs: wrong dimensions, inconsistent sequences, bad parameters.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or breakdown inside a numerical routine.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid option combinations (e.g. curvature requested but not evaluated).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stacked control stationarity matrix of a stage saddle is numerically singular.
struct SaddleSingularError : NumericalError {
  explicit SaddleSingularError(int stage)
      : NumericalError("stage " + std::to_string(stage) +
                       ": stacked stationarity matrix is singular"),
        stage(stage) {}
  int stage;
};

// The one-shot open-loop KKT matrix is numerically singular.
struct OpenLoopSingularError : NumericalError {
  OpenLoopSingularError() : NumericalError("open-loop KKT matrix is singular") {}
};

// A control coordinate sits at coincident lower and upper bounds.
struct DegenerateBoundError : InputError {
  DegenerateBoundError(int stage, int agent, int coord)
      : InputError("stage " + std::to_string(stage) + ", agent " +
                   std::to_string(agent) + ", coordinate " +
                   std::to_string(coord) + ": lower bound equals upper bound"),
        stage(stage), agent(agent), coord(coord) {}
  int stage, agent, coord;
};

}  // namespace zsg
