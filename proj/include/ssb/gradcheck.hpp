// Copyright 2026 The ssb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ssb/tensor.hpp"

namespace ssb {

template <typename T>
struct GradcheckParameter {
  std::string name;
  Tensor<T> value;
};

struct GradcheckEntry {
  std::string name;
  bool frozen = false;
  double max_rel_error = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

struct GradcheckResult {
  // Max over non-frozen parameters of
  // |analytic - central| / max(|analytic|, |central|, 1e-12).
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::vector<GradcheckEntry> entries;
};

// Compares reverse-mode gradients of the scalar function f against central
// differences with step h. f builds its graph on the tape it is given and
// must be deterministic. Parameters with requires_grad() == false are frozen:
// their analytic gradient is reported as exactly zero and they are not
// perturbed.
template <typename T>
GradcheckResult gradcheck(const std::function<Tensor<T>(Tape<T>&)>& f,
                          const std::vector<GradcheckParameter<T>>& params, double h);

extern template GradcheckResult gradcheck<float>(
    const std::function<Tensor<float>(Tape<float>&)>&,
    const std::vector<GradcheckParameter<float>>&, double);
extern template GradcheckResult gradcheck<double>(
    const std::function<Tensor<double>(Tape<double>&)>&,
    const std::vector<GradcheckParameter<double>>&, double);

}  // namespace ssb
