/*
 * Copyright 2026 The weaklab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Randomized central-difference gradient checks for every autodiff
// primitive and for the three loss compositions, in double precision.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "weaklab/autodiff.hpp"

namespace wltest {

using TapeD = weaklab::ad::Tape<double>;
using VarD = weaklab::ad::Var<double>;

struct Input {
  weaklab::ad::Shape shape;
  std::vector<double> values;
};

using Builder = std::function<VarD(TapeD&, const std::vector<VarD>&)>;

// Seeds the output of f(inputs) with a random cotangent R and compares the
// resulting input gradients with central differences of <f(x), R>.
// Returns the worst relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
// over the input tensors.
double grad_check(const Builder& f, const std::vector<Input>& inputs, std::uint64_t seed, double h = 1e-5);

struct CheckSummary {
  std::string name;
  int instances = 0;
  double worst = 0.0;
};

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradStep = 1e-5;

std::vector<CheckSummary> run_gradient_suite(int instances, std::uint64_t seed);

}  // namespace wltest
