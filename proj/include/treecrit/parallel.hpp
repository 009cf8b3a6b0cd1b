#pragma once

#include <atomic>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace treecrit {

// Applies fn(item, index) over items with at most `workers` threads and
// returns results in input order. The first exception (lowest index) is
// rethrown after all workers finish.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, int workers, Fn fn) {
  using Result = decltype(fn(items.front(), std::size_t{0}));
  std::vector<std::optional<Result>> slots(items.size());
  std::vector<std::exception_ptr> errors(items.size());

  if (workers <= 1 || items.size() <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) slots[i] = fn(items[i], i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= items.size()) return;
        try {
          slots[i] = fn(items[i], i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    int count = std::min<int>(workers, static_cast<int>(items.size()));
    pool.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<Result> out;
  out.reserve(items.size());
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

}  // namespace treecrit
