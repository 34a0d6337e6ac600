#pragma once

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace secstack::detail {

// Bookkeeping for thread registration.  Registration is a cold path, so a
// mutex is fine; the hot paths only ever touch the handle that comes out.
class ThreadRegistry {
 public:
  explicit ThreadRegistry(std::uint32_t capacity) : taken_(capacity, false) {}

  void acquire(std::uint32_t tid) {
    if (tid >= taken_.size())
      throw std::out_of_range("thread id " + std::to_string(tid) +
                              " exceeds configured capacity of " +
                              std::to_string(taken_.size()));
    std::lock_guard<std::mutex> lock(mu_);
    if (taken_[tid])
      throw std::invalid_argument("thread id " + std::to_string(tid) +
                                  " is already registered");
    taken_[tid] = true;
  }

  void release(std::uint32_t tid) {
    std::lock_guard<std::mutex> lock(mu_);
    taken_[tid] = false;
  }

 private:
  std::mutex mu_;
  std::vector<bool> taken_;
};

}  // namespace secstack::detail
