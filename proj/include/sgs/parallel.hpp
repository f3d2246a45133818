#pragma once

#include <functional>

namespace sgs {

// Worker count: min(hardware threads, SGS_THREADS) when the env var is set,
// hardware threads otherwise. Always >= 1.
int worker_count();

// Runs fn(chunk, begin, end) over a partition of [0, n) on the shared
// pool. The partition depends only on n, never on the worker count, so
// any reduction keyed by chunk index is bit-reproducible across
// machines. Blocks until every chunk is done. fn must not throw.
void parallel_chunks(int n, const std::function<void(int, int, int)>& fn);

// Fixed chunk count used by parallel_chunks (and by callers that keep
// one accumulation buffer per chunk).
constexpr int kParallelChunks = 8;

}  // namespace sgs
