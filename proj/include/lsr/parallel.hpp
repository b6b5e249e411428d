#pragma once

#include <cstdint>
#include <functional>

namespace lsr {

// Worker cap: min(hardware threads, LSR_THREADS env var if set). Can be
// overridden programmatically (e.g. to pin single-core benchmarks).
int max_threads();
void set_max_threads(int n);

// Runs fn(begin, end) over chunks of [0, n). Chunks are disjoint, so any
// kernel that writes only inside its chunk is bit-deterministic regardless
// of the worker count. Calls from inside a worker run inline.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace lsr
