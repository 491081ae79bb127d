#include "sparsepc/util.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace sparsepc {

std::size_t threadCount() {
    if (const char* env = std::getenv("SPARSEPC_THREADS")) {
        long v = std::atol(env);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    std::size_t hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallelChunks(std::size_t n, std::size_t chunk,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (chunk == 0) chunk = 1;
    const std::size_t numChunks = (n + chunk - 1) / chunk;
    const std::size_t threads = std::min(threadCount(), numChunks);

    if (threads <= 1) {
        for (std::size_t c = 0; c < numChunks; ++c)
            fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }

    std::atomic<std::size_t> nextChunk{0};
    auto work = [&] {
        for (;;) {
            std::size_t c = nextChunk.fetch_add(1);
            if (c >= numChunks) return;
            fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
}

}  // namespace sparsepc
