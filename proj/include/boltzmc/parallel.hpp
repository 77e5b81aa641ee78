#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace boltzmc {

/// Run `produce(chunk)` for chunk = 0..n_chunks-1 on a worker pool and hand
/// each result to `merge(chunk, result)` in ascending chunk order on the
/// calling thread. The chunk partition and merge order are fixed, so the
/// merged result is bit-identical for any worker count. A bounded window
/// keeps at most a few results in flight.
template <class Result, class Produce, class Merge>
void for_each_chunk_ordered(std::size_t n_chunks, int workers, Produce&& produce, Merge&& merge) {
    if (workers <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) merge(c, produce(c));
        return;
    }

    std::mutex mu;
    std::condition_variable cv_results;
    std::condition_variable cv_window;
    std::map<std::size_t, Result> ready;
    std::atomic<std::size_t> next_chunk{0};
    std::size_t next_merge = 0;
    std::exception_ptr failure;
    const std::size_t window = 4 * static_cast<std::size_t>(workers);

    auto worker = [&] {
        while (true) {
            const std::size_t c = next_chunk.fetch_add(1);
            if (c >= n_chunks) return;
            {
                // backpressure: stay within the merge window
                std::unique_lock lk(mu);
                cv_window.wait(lk, [&] { return failure || c < next_merge + window; });
                if (failure) return;
            }
            try {
                Result r = produce(c);
                std::lock_guard lk(mu);
                ready.emplace(c, std::move(r));
                cv_results.notify_one();
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failure) failure = std::current_exception();
                cv_results.notify_one();
                cv_window.notify_all();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);

    {
        std::unique_lock lk(mu);
        while (next_merge < n_chunks) {
            cv_results.wait(lk, [&] { return failure || ready.count(next_merge) > 0; });
            if (failure) break;
            auto node = ready.extract(next_merge);
            lk.unlock();
            merge(next_merge, std::move(node.mapped()));
            lk.lock();
            ++next_merge;
            cv_window.notify_all();
        }
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace boltzmc
