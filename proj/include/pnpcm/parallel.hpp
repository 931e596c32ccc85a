// SPDX-License-Identifier: Apache-2.0
//
// pnpcm - plug-and-play consistency-model channel estimation
// Copyright (C) 2026 pnpcm contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef PNPCM_PARALLEL_HPP
#define PNPCM_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pnpcm {

inline int resolve_threads(int requested) {
    if (requested > 0)
        return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [begin, end) on up to n_threads workers. Results must
// be written to per-index slots; any deterministic reduction happens after
// the join, in index order. The first exception thrown by a worker is
// rethrown on the calling thread.
inline void parallel_for(long begin, long end, int n_threads, const std::function<void(long)> &fn) {
    long count = end - begin;
    if (count <= 0)
        return;
    int workers = resolve_threads(n_threads);
    if (workers > count)
        workers = static_cast<int>(count);
    if (workers <= 1) {
        for (long i = begin; i < end; ++i)
            fn(i);
        return;
    }
    std::atomic<long> next(begin);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&]() {
        for (;;) {
            long i = next.fetch_add(1);
            if (i >= end)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t)
        pool.emplace_back(body);
    body();
    for (auto &th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace pnpcm

#endif
