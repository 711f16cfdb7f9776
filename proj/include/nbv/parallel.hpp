#pragma once

#include <cstddef>
#include <functional>

namespace nbv {

// Process-wide worker count; set once from the CLI --jobs flag.
void set_worker_count(int jobs);
int worker_count();

// Runs fn(begin, end) over [0, n) split into chunks of `chunk` items. Chunks are
// claimed by an atomic counter, so execution order varies but chunk boundaries do
// not: callers that reduce must collect per-chunk partials and fold them in chunk
// order to stay deterministic for any worker count.
void parallel_for_chunked(size_t n, size_t chunk,
                          const std::function<void(size_t, size_t)>& fn);

inline size_t chunk_count(size_t n, size_t chunk) { return (n + chunk - 1) / chunk; }

}  // namespace nbv
