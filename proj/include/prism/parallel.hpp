#pragma once
// Bounded fan-out map that preserves input order. Workers pull indices from a
// shared counter; result i always corresponds to input i, so merges stay
// deterministic regardless of completion order.

#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

namespace prism {

template <class T>
struct TaskResult {
    std::optional<T> value;
    std::exception_ptr error;

    bool ok() const { return value.has_value(); }
};

template <class In, class Fn>
auto parallel_map(const std::vector<In>& items, std::size_t max_in_flight, Fn&& fn)
    -> std::vector<TaskResult<decltype(fn(items.front()))>> {
    using Out = decltype(fn(items.front()));
    std::vector<TaskResult<Out>> results(items.size());
    if (items.empty()) return results;

    const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, items.size()));
    std::atomic<std::size_t> next{0};
    auto run = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                results[i].value = fn(items[i]);
            } catch (...) {
                results[i].error = std::current_exception();
            }
        }
    };

    if (workers == 1) {
        run();
        return results;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    return results;
}

inline std::string describe_exception(std::exception_ptr ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

} // namespace prism
