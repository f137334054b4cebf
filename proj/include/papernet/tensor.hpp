// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace papernet {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces or consumes NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <class T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
};

/// Dense row-major tensor with shared storage. Copies of a Tensor alias the
/// same buffer; use clone() for a deep copy.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : storage_(std::make_shared<TensorStorage<T>>()) {
    storage_->data.assign(numel(shape), fill);
    storage_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values)
      : storage_(std::make_shared<TensorStorage<T>>()) {
    if (numel(shape) != values.size()) {
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(shape));
    }
    storage_->shape = std::move(shape);
    storage_->data = std::move(values);
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t i) const { return storage_->shape.at(i); }
  std::size_t size() const { return storage_->data.size(); }

  // Handle semantics: constness applies to the handle, not the buffer.
  std::span<T> data() const { return storage_->data; }
  T& operator[](std::size_t i) const { return storage_->data[i]; }

  T item() const {
    if (size() != 1) {
      throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    }
    return storage_->data[0];
  }

  bool requires_grad() const { return storage_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    storage_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return !storage_->grad.empty(); }
  std::span<T> grad() const { return storage_->grad; }
  void ensure_grad() const {
    if (storage_->grad.size() != storage_->data.size()) {
      storage_->grad.assign(storage_->data.size(), T{0});
    }
  }
  void zero_grad() {
    if (has_grad()) std::fill(storage_->grad.begin(), storage_->grad.end(), T{0});
  }

  Tensor clone() const {
    Tensor out(shape());
    std::copy(storage_->data.begin(), storage_->data.end(), out.data().begin());
    return out;
  }

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }
  const std::shared_ptr<TensorStorage<T>>& storage() const { return storage_; }

 private:
  std::shared_ptr<TensorStorage<T>> storage_;
};

/// Reverse-mode tape. Operations record themselves on the tape that is
/// active in the current thread (see Tape::record()).
template <class T>
class Tape {
 public:
  using StoragePtr = std::shared_ptr<TensorStorage<T>>;

  struct Entry {
    std::string op;
    std::vector<StoragePtr> inputs;
    StoragePtr output;
    std::function<void()> backward;
  };

  class Recording {
   public:
    explicit Recording(Tape* tape) : previous_(current()) { current() = tape; }
    ~Recording() { current() = previous_; }
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] Recording record() { return Recording(this); }
  static Tape* active() { return current(); }

  void push(Entry entry) {
    if (consumed_) throw TapeError("tape already consumed; call reset()");
    entries_.push_back(std::move(entry));
  }

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void reset() {
    entries_.clear();
    consumed_ = false;
  }

  /// Populates .grad on every tensor reachable from `loss`. Gradients of
  /// recorded tensors are zeroed first unless `accumulate` is set.
  void backward(const Tensor<T>& loss, bool accumulate = false) {
    if (consumed_) throw TapeError("backward called twice on the same tape");
    if (loss.size() != 1) {
      throw TapeError("backward needs a scalar loss, got " + shape_str(loss.shape()));
    }
    const auto& target = loss.storage();
    bool found = false;
    for (const auto& e : entries_) found = found || e.output == target;
    if (!found) throw TapeError("loss tensor was not produced on this tape");

    for (auto& e : entries_) {
      auto touch = [accumulate](const StoragePtr& s) {
        if (!s->requires_grad) return;
        if (s->grad.size() != s->data.size() || !accumulate) {
          s->grad.assign(s->data.size(), T{0});
        }
      };
      for (auto& in : e.inputs) touch(in);
      touch(e.output);
    }
    target->grad[0] = T{1};
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->backward) it->backward();
    }
    consumed_ = true;
  }

 private:
  static Tape*& current() {
    thread_local Tape* tape = nullptr;
    return tape;
  }

  std::vector<Entry> entries_;
  bool consumed_ = false;
};

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value in tensor " +
                         shape_str(t.shape()));
    }
  }
}

}  // namespace papernet
