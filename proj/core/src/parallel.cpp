#include "kqf/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace kqf {

int default_threads() {
    if (const char* env = std::getenv("KQF_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v < 1024) {
            return static_cast<int>(v);
        }
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_chunks(uint64_t n, int threads,
                     const std::function<void(uint64_t, uint64_t)>& fn) {
    if (n == 0) {
        return;
    }
    if (threads <= 0) {
        threads = default_threads();
    }
    uint64_t workers = std::min<uint64_t>(static_cast<uint64_t>(threads), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const uint64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (uint64_t w = 0; w < workers; ++w) {
        const uint64_t begin = w * chunk;
        const uint64_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                if (begin < end) {
                    fn(begin, end);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace kqf
