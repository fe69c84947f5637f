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

#include "ssb/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "ssb/error.hpp"

namespace ssb {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> data(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  Tensor t;
  t.storage_ = std::make_shared<Storage>();
  t.storage_->shape = std::move(shape);
  t.storage_->data = std::move(data);
  t.storage_->requires_grad = requires_grad;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

template <typename T>
const typename Tensor<T>::Storage& Tensor<T>::storage() const {
  if (!storage_) throw ContractError("use of an undefined tensor");
  return *storage_;
}

template <typename T>
typename Tensor<T>::Storage& Tensor<T>::storage() {
  if (!storage_) throw ContractError("use of an undefined tensor");
  return *storage_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return storage().shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(s));
  }
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return storage().data.size();
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return storage().data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  return storage().data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_string(shape()));
  }
  return storage().data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return storage().requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  Storage& s = storage();
  s.requires_grad = on;
  if (!on) {
    s.grad.clear();
    s.grad.shrink_to_fit();
    s.has_grad = false;
  }
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return storage().has_grad;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  const Storage& s = storage();
  if (!s.has_grad) throw ContractError("tensor has no gradient");
  return s.grad;
}

template <typename T>
std::span<T> Tensor<T>::grad_buffer() const {
  if (!storage_) throw ContractError("use of an undefined tensor");
  Storage& s = *storage_;
  if (!s.requires_grad) {
    throw ContractError("grad buffer requested for a tensor that does not require grad");
  }
  if (!s.has_grad) {
    s.grad.assign(s.data.size(), T(0));
    s.has_grad = true;
  }
  return s.grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  Storage& s = storage();
  if (s.has_grad) std::fill(s.grad.begin(), s.grad.end(), T(0));
}

template <typename T>
void Tensor<T>::clear_grad() {
  Storage& s = storage();
  s.grad.clear();
  s.has_grad = false;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return clone_with(requires_grad());
}

template <typename T>
Tensor<T> Tensor<T>::clone_with(bool requires_grad) const {
  const Storage& s = storage();
  return from_data(s.shape, s.data, requires_grad);
}

template <typename T>
bool Tape<T>::tracks(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void Tape<T>::record(std::string op, std::initializer_list<const Tensor<T>*> inputs,
                     const Tensor<T>& output, std::function<void()> backward) {
  Record r;
  r.op = std::move(op);
  for (const Tensor<T>* t : inputs) r.inputs.push_back(t->id());
  r.output = output.id();
  r.backward = std::move(backward);
  records_.push_back(std::move(r));
}

template <typename T>
void Tape<T>::record(std::string op, const std::vector<Tensor<T>>& inputs,
                     const Tensor<T>& output, std::function<void()> backward) {
  Record r;
  r.op = std::move(op);
  for (const Tensor<T>& t : inputs) r.inputs.push_back(t.id());
  r.output = output.id();
  r.backward = std::move(backward);
  records_.push_back(std::move(r));
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    records_.clear();
    return;
  }
  const bool produced_here =
      std::any_of(records_.begin(), records_.end(),
                  [&](const Record& r) { return r.output == loss.id(); });
  if (!produced_here && !records_.empty()) {
    throw ContractError("loss was not produced under this tape");
  }
  Tensor<T> seed = loss;
  seed.grad_buffer()[0] = T(1);
  // Rules are moved out before running so each one executes exactly once,
  // and the captured intermediates are released as we go.
  std::vector<Record> records = std::move(records_);
  records_.clear();
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    auto rule = std::move(it->backward);
    it->backward = nullptr;
    if (rule) rule();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace ssb
