#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "hyssra/errors.hpp"
#include "hyssra/rng.hpp"

namespace hyssra::mhsac {

/// One joint transition. Per-agent blocks are stored agent-major.
struct Transition {
  std::vector<double> features;       // N * 2M
  std::vector<int> arms;              // N
  std::vector<double> unit_actions;   // N, tanh(u) in (-1, 1)
  double reward = 0.0;                // r_t = sum_n r^n
  std::vector<double> next_features;  // N * 2M
};

/// Fixed-capacity FIFO ring buffer.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InputError("ReplayBuffer: capacity must be >= 1");
    items_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
    }
    head_ = (head_ + 1) % capacity_;
  }

  /// i = 0 is the oldest stored item.
  const T& at(std::size_t i) const {
    if (i >= items_.size()) throw InputError("ReplayBuffer::at: index out of range");
    const std::size_t start = items_.size() < capacity_ ? 0 : head_;
    return items_[(start + i) % capacity_];
  }

  /// `count` distinct indices in [0, size()), uniform over subsets (Floyd).
  template <class URBG>
  std::vector<std::size_t> sample_indices(std::size_t count, URBG& rng) const {
    const std::size_t n = items_.size();
    if (count > n) throw InputError("ReplayBuffer: minibatch larger than buffer");
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    for (std::size_t j = n - count; j < n; ++j) {
      const auto t = static_cast<std::size_t>(uniform_index(rng, static_cast<int>(j + 1)));
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
        chosen.push_back(t);
      } else {
        chosen.push_back(j);
      }
    }
    return chosen;
  }

  template <class URBG>
  std::vector<T> sample(std::size_t count, URBG& rng) const {
    std::vector<T> out;
    out.reserve(count);
    for (std::size_t i : sample_indices(count, rng)) out.push_back(at(i));
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

}  // namespace hyssra::mhsac
