#pragma once

// Gray-code walk over all 2^N occupation masks with O(#coupling classes)
// energy updates per step. Shared by the exhaustive statistics, composition
// spectrum and exact sampler.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rydmap/energetics.hpp"

namespace rydmap::detail {

/// Per site, couplings are grouped by exactly equal value; each group keeps a
/// bitmask of partner sites so the local field is sum(value * popcount(mask & state)).
class GrayKernel {
public:
    explicit GrayKernel(const QuadraticEnergy& q) : n_(q.size()), field_(q.size()) {
        if (n_ > 63) throw std::invalid_argument("Gray-code kernel supports at most 63 sites");
        offsets_.push_back(0);
        for (std::size_t i = 0; i < n_; ++i) {
            field_[i] = q.field(i);
            const auto row = q.coupling_row(i);
            std::vector<std::pair<double, std::uint64_t>> groups;
            for (std::size_t j = 0; j < n_; ++j) {
                if (j == i || row[j] == 0.0) continue;
                auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == row[j]; });
                if (it == groups.end()) {
                    groups.push_back({row[j], std::uint64_t{1} << j});
                } else {
                    it->second |= std::uint64_t{1} << j;
                }
            }
            for (const auto& [v, m] : groups) {
                values_.push_back(v);
                masks_.push_back(m);
            }
            offsets_.push_back(values_.size());
        }
    }

    std::size_t size() const noexcept { return n_; }

    double energy(std::uint64_t state) const {
        double e = 0.0;
        std::uint64_t rest = state;
        while (rest) {
            const auto i = static_cast<std::size_t>(std::countr_zero(rest));
            rest &= rest - 1;
            e += field_[i];
            // Pairs counted once: partners with a higher index only.
            const std::uint64_t later = rest;
            for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
                e += values_[k] * std::popcount(masks_[k] & later);
            }
        }
        return e;
    }

    double flip_delta(std::uint64_t state, std::size_t i) const {
        double local = field_[i];
        for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
            local += values_[k] * std::popcount(masks_[k] & state);
        }
        return ((state >> i) & 1u) ? -local : local;
    }

    /// Visits Gray codes g(t) = t ^ (t >> 1) for t in [begin, end).
    template <class Visit>
    void run(std::uint64_t begin, std::uint64_t end, Visit&& visit) const {
        if (begin >= end) return;
        std::uint64_t state = begin ^ (begin >> 1);
        double e = energy(state);
        visit(state, e);
        for (std::uint64_t t = begin + 1; t < end; ++t) {
            const auto i = static_cast<std::size_t>(std::countr_zero(t));
            e += flip_delta(state, i);
            state ^= std::uint64_t{1} << i;
            visit(state, e);
        }
    }

private:
    std::size_t n_;
    std::vector<double> field_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
    std::vector<std::uint64_t> masks_;
};

/// Fixed partition of [0, 2^N) into at most 256 equal chunks. The partition
/// depends only on N, so chunk-ordered reductions are thread-count independent.
struct ChunkPlan {
    std::uint64_t chunk_size = 1;
    std::size_t chunks = 1;

    explicit ChunkPlan(std::size_t n_sites) {
        const std::size_t chunk_bits = std::min<std::size_t>(n_sites, 8);
        chunks = std::size_t{1} << chunk_bits;
        chunk_size = std::uint64_t{1} << (n_sites - chunk_bits);
    }
    std::uint64_t begin(std::size_t c) const { return c * chunk_size; }
    std::uint64_t end(std::size_t c) const { return (c + 1) * chunk_size; }
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(task) for task in [0, tasks) on a pool of worker threads.
template <class Fn>
void parallel_tasks(std::size_t tasks, unsigned threads, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), tasks));
    if (workers <= 1) {
        for (std::size_t t = 0; t < tasks; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t t = next.fetch_add(1);
                if (t >= tasks || failed.load()) return;
                try {
                    fn(t);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

/// exp(-x) is exactly zero in double precision beyond this.
inline constexpr double kUnderflowExponent = 745.2;

}  // namespace rydmap::detail
