#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace pptree {

/// Runs fn(state, i) for i in [0, count) on `workers` threads, each thread with
/// its own `make_state()`, and returns the results in index order. Each result
/// must depend only on its index, so the output is independent of the worker count.
template <class MakeState, class Fn>
auto run_replicates_with(std::uint64_t count, unsigned workers, MakeState&& make_state, Fn&& fn)
{
    using State = decltype(make_state());
    using Result = decltype(fn(std::declval<State&>(), std::uint64_t{}));
    std::vector<Result> results(count);
    workers = std::max(1U, workers);
    if (workers == 1 || count < 2) {
        State state = make_state();
        for (std::uint64_t i = 0; i < count; ++i)
            results[i] = fn(state, i);
        return results;
    }

    constexpr std::uint64_t kChunk = 64;
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        try {
            State state = make_state();
            for (;;) {
                const std::uint64_t begin = next.fetch_add(kChunk);
                if (begin >= count)
                    return;
                const std::uint64_t end = std::min(count, begin + kChunk);
                for (std::uint64_t i = begin; i < end; ++i)
                    results[i] = fn(state, i);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
            next.store(count);
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
    return results;
}

/// run_replicates_with without per-thread state.
template <class Fn>
auto run_replicates(std::uint64_t count, unsigned workers, Fn&& fn)
{
    return run_replicates_with(
        count, workers, [] { return 0; }, [&](int&, std::uint64_t i) { return fn(i); });
}

/// Per-worker accumulation followed by an ordered merge. `make` builds an empty
/// accumulator, `step(acc, i)` folds replicate i in, `merge(into, from)` must be
/// associative and commutative for the result to be worker-count independent.
template <class Make, class Step, class Merge>
auto reduce_replicates(std::uint64_t count, unsigned workers, Make&& make, Step&& step, Merge&& merge)
{
    using Acc = decltype(make());
    workers = std::max(1U, workers);
    std::vector<Acc> partial;
    partial.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        partial.push_back(make());

    constexpr std::uint64_t kChunk = 256;
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&](unsigned w) {
        try {
            for (;;) {
                const std::uint64_t begin = next.fetch_add(kChunk);
                if (begin >= count)
                    return;
                const std::uint64_t end = std::min(count, begin + kChunk);
                for (std::uint64_t i = begin; i < end; ++i)
                    step(partial[w], i);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
            next.store(count);
        }
    };
    if (workers == 1) {
        worker(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker, w);
    }
    if (failure)
        std::rethrow_exception(failure);
    Acc total = make();
    for (auto& p : partial)
        merge(total, p);
    return total;
}

} // namespace pptree
