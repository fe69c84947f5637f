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

#include "ssb/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ssb {

template <typename T>
GradcheckResult gradcheck(const std::function<Tensor<T>(Tape<T>&)>& f,
                          const std::vector<GradcheckParameter<T>>& params, double h) {
  for (const auto& p : params) {
    Tensor<T> handle = p.value;
    if (handle.requires_grad()) handle.clear_grad();
  }
  {
    Tape<T> tape;
    Tensor<T> loss = f(tape);
    tape.backward(loss);
  }

  auto evaluate = [&]() {
    Tape<T> tape(false);
    return static_cast<double>(f(tape).item());
  };

  GradcheckResult result;
  for (const auto& p : params) {
    GradcheckEntry entry;
    entry.name = p.name;
    entry.frozen = !p.value.requires_grad();
    const std::size_t n = p.value.numel();
    entry.analytic.assign(n, 0.0);
    if (!entry.frozen && p.value.has_grad()) {
      auto g = p.value.grad();
      for (std::size_t i = 0; i < n; ++i) entry.analytic[i] = static_cast<double>(g[i]);
    }
    if (!entry.frozen) {
      entry.numeric.assign(n, 0.0);
      Tensor<T> handle = p.value;
      auto data = handle.mutable_data();
      for (std::size_t i = 0; i < n; ++i) {
        const T saved = data[i];
        data[i] = static_cast<T>(static_cast<double>(saved) + h);
        const double up = evaluate();
        data[i] = static_cast<T>(static_cast<double>(saved) - h);
        const double down = evaluate();
        data[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        entry.numeric[i] = numeric;
        const double a = entry.analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
        const double rel = std::abs(a - numeric) / denom;
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        if (result.worst_parameter.empty() || rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_parameter = p.name;
          result.worst_index = i;
        }
      }
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

template GradcheckResult gradcheck<float>(const std::function<Tensor<float>(Tape<float>&)>&,
                                          const std::vector<GradcheckParameter<float>>&, double);
template GradcheckResult gradcheck<double>(const std::function<Tensor<double>(Tape<double>&)>&,
                                           const std::vector<GradcheckParameter<double>>&, double);

}  // namespace ssb
