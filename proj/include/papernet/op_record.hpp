// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "papernet/tensor.hpp"

namespace papernet::detail {

template <class T>
bool any_requires_grad(const std::vector<Tensor<T>>& inputs) {
  for (const auto& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

/// Pushes a backward rule onto the active tape if any input is tracked.
/// The output is marked as requiring a gradient in that case.
template <class T>
void record(std::string op, const std::vector<Tensor<T>>& inputs, Tensor<T> out,
            std::function<void()> backward) {
  Tape<T>* tape = Tape<T>::active();
  if (tape == nullptr || !any_requires_grad(inputs)) return;
  out.set_requires_grad(true);
  typename Tape<T>::Entry entry;
  entry.op = std::move(op);
  for (const auto& t : inputs) entry.inputs.push_back(t.storage());
  entry.output = out.storage();
  entry.backward = std::move(backward);
  tape->push(std::move(entry));
}

}  // namespace papernet::detail
