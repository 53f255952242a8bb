#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "roiloc/error.hpp"

namespace roiloc {

/// Fixed-capacity replay memory. Once full, each push overwrites the oldest item.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error("replay capacity must be positive");
    items_.reserve(capacity);
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
    ++pushed_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  /// Total pushes, including overwritten ones.
  std::size_t pushed() const { return pushed_; }

  /// Indexes storage slots, not insertion order.
  const T& operator[](std::size_t i) const { return items_[i]; }

  /// Uniform draw with replacement.
  template <typename Rng>
  std::vector<std::size_t> sample(std::size_t count, Rng& rng) const {
    if (items_.empty()) throw Error("cannot sample from an empty replay");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> out(count);
    for (auto& i : out) i = pick(rng);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::size_t pushed_ = 0;
  std::vector<T> items_;
};

}  // namespace roiloc
