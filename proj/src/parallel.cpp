#include "nbv/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace nbv {

namespace {
int g_workers = 0;  // 0 = use hardware concurrency
}

void set_worker_count(int jobs) { g_workers = jobs; }

int worker_count() {
    if (g_workers > 0) return g_workers;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for_chunked(size_t n, size_t chunk,
                          const std::function<void(size_t, size_t)>& fn) {
    if (n == 0) return;
    const size_t chunks = chunk_count(n, chunk);
    const int workers = std::min<size_t>(worker_count(), chunks);
    if (workers <= 1) {
        for (size_t c = 0; c < chunks; ++c) {
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
        return;
    }
    std::atomic<size_t> next{0};
    auto body = [&] {
        for (;;) {
            const size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int i = 1; i < workers; ++i) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
}

}  // namespace nbv
