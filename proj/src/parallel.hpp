#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mdf::detail {

// Splits [0, n) into contiguous chunks, one per hardware thread. The first exception wins.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
  const auto hw = static_cast<std::ptrdiff_t>(std::max(1u, std::thread::hardware_concurrency()));
  const std::ptrdiff_t workers = std::min(hw, n);
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  const std::ptrdiff_t chunk = (n + workers - 1) / workers;
  for (std::ptrdiff_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::ptrdiff_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mdf::detail
