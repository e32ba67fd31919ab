// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_THREADING_H_
#define MIMICENH_THREADING_H_

#include <cstdint>
#include <functional>

namespace mimicenh {

// Runs fn(i) for i in [0, n). Work is partitioned statically over worker
// threads and each index is fully evaluated by exactly one thread, so
// results are bit-identical for any thread count. MIMICENH_DETERMINISTIC=1
// (or MIMICENH_THREADS=1) forces the single-threaded path.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

int worker_threads();

}  // namespace mimicenh

#endif  // MIMICENH_THREADING_H_
