#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dflow {

/// Number of worker threads used by parallel_for; 1 disables threading.
inline int& worker_count() {
    static int count = std::max(1u, std::thread::hardware_concurrency());
    return count;
}

/// Calls body(k) for k in [0, count) on up to worker_count() threads. The first
/// exception thrown by any call is rethrown after all workers finish.
template <class F>
void parallel_for(int count, F&& body) {
    const int workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (int k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (int k = next++; k < count; k = next++) {
            try {
                body(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace dflow
