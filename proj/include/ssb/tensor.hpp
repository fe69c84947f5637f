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

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssb {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tape;

// Dense row-major array. A Tensor is a handle: copies share storage, which is
// how the tape refers back to inputs and outputs. Use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  // Writable view, for parameter initialization and optimizer updates.
  std::span<T> mutable_data();
  T item() const;
  T value(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  // Turning gradients off also releases any grad buffer.
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const T> grad() const;
  // Grad buffer, allocated as zeros on first use. Only valid when
  // requires_grad() is true. Gradient accumulation is the one mutation
  // allowed through a const handle.
  std::span<T> grad_buffer() const;
  void zero_grad();
  void clear_grad();

  Tensor clone() const;
  // Same data, no gradient tracking.
  Tensor detach() const { return clone_with(false); }

  const void* id() const noexcept { return storage_.get(); }
  bool same_storage(const Tensor& other) const noexcept {
    return storage_ == other.storage_;
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Tensor clone_with(bool requires_grad) const;
  const Storage& storage() const;
  Storage& storage();

  std::shared_ptr<Storage> storage_;
};

// Define-by-run record of differentiable operations. Operations append in
// execution order; backward() replays the rules in reverse and then clears
// the record. A tape created with recording disabled is used for inference:
// nothing is recorded and outputs never require gradients.
template <typename T>
class Tape {
 public:
  struct Record {
    std::string op;
    std::vector<const void*> inputs;
    const void* output = nullptr;
    std::function<void()> backward;
  };

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }

  // True when an op over these inputs must be recorded.
  bool tracks(std::initializer_list<const Tensor<T>*> inputs) const;

  void record(std::string op, std::initializer_list<const Tensor<T>*> inputs,
              const Tensor<T>& output, std::function<void()> backward);
  void record(std::string op, const std::vector<Tensor<T>>& inputs,
              const Tensor<T>& output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every tensor that requires
  // gradients. Each recorded rule runs exactly once.
  void backward(const Tensor<T>& loss);

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<Record>& records() const noexcept { return records_; }
  void clear() { records_.clear(); }

 private:
  bool recording_;
  std::vector<Record> records_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ssb
