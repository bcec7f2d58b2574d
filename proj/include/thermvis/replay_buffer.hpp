#pragma once

#include <random>
#include <vector>

#include "thermvis/tensor.hpp"

namespace thermvis {

/// History of generated images shown to a critic in place of the newest fakes.
///
/// Until full, every fake is stored and returned as-is. Once full, each fake
/// is returned with probability 1/2; otherwise a uniformly chosen stored
/// image is returned and replaced by the new fake.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 50) : capacity_(capacity) {}

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(items_.size()); }
  const std::vector<Tensor<T>>& items() const { return items_; }
  std::vector<Tensor<T>>& items() { return items_; }

  template <typename Rng>
  Tensor<T> query(const Tensor<T>& fakes, Rng& rng) {
    if (capacity_ == 0) return fakes;
    Tensor<T> out(fakes.shape());
    const std::size_t block = fakes.size() / static_cast<std::size_t>(fakes.n());
    std::bernoulli_distribution coin(0.5);
    for (int n = 0; n < fakes.n(); ++n) {
      Tensor<T> item = fakes.slice(n, 1);
      const T* chosen = item.data();
      Tensor<T> swapped;
      if (size() < capacity_) {
        items_.push_back(item);
      } else if (coin(rng)) {
        std::uniform_int_distribution<int> pick(0, capacity_ - 1);
        const int k = pick(rng);
        swapped = std::move(items_[static_cast<std::size_t>(k)]);
        items_[static_cast<std::size_t>(k)] = item;
        chosen = swapped.data();
      }
      std::copy_n(chosen, block, out.sample(n));
    }
    return out;
  }

 private:
  int capacity_;
  std::vector<Tensor<T>> items_;
};

}  // namespace thermvis
