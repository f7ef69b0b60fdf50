#include "nlbem/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nlbem {

namespace {
std::atomic<int> g_limit{0};
}

void set_thread_limit(int k) { g_limit = std::max(0, k); }

int thread_limit() {
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    const int k = g_limit.load();
    return k > 0 ? std::min(k, hw) : hw;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(thread_limit(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace nlbem
