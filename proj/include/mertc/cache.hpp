#pragma once

// Solve cache keyed by spec hash, with an optional on-disk layer, and a
// bounded parallel map used to run independent solves concurrently.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "mertc/field_io.hpp"
#include "mertc/solver.hpp"

namespace mertc {

using FieldPtr = std::shared_ptr<const SolutionField>;

class FieldCache {
public:
    /// `capacity` bounds the number of fields kept in memory; `directory`,
    /// when non-empty, persists every solved field as <hash>.bin.
    explicit FieldCache(std::size_t capacity = 24, std::filesystem::path directory = {})
        : capacity_(capacity), directory_(std::move(directory)) {
        if (!directory_.empty()) std::filesystem::create_directories(directory_);
    }

    /// Called once for every field entering the memory layer, whether solved
    /// or read from disk (not for memory hits), possibly from several worker
    /// threads at once.
    void on_solved(std::function<void(const SolutionField&)> hook) { hook_ = std::move(hook); }

    [[nodiscard]] FieldPtr get(const ProblemSpec& spec) {
        const auto key = spec_hash(spec);
        std::shared_future<FieldPtr> pending;
        std::promise<FieldPtr> promise;
        bool owner = false;
        {
            std::lock_guard lock(mutex_);
            if (auto it = memory_.find(key); it != memory_.end()) {
                ++hits_;
                touch(key);
                return it->second;
            }
            if (auto it = in_flight_.find(key); it != in_flight_.end()) {
                pending = it->second;
            } else {
                pending = promise.get_future().share();
                in_flight_.emplace(key, pending);
                owner = true;
            }
        }
        if (!owner) return pending.get();

        FieldPtr field;
        try {
            field = load_or_solve(spec, key);
        } catch (...) {
            promise.set_exception(std::current_exception());
            std::lock_guard lock(mutex_);
            in_flight_.erase(key);
            throw;
        }
        promise.set_value(field);
        std::lock_guard lock(mutex_);
        in_flight_.erase(key);
        if (capacity_ > 0) {
            memory_[key] = field;
            touch(key);
            while (memory_.size() > capacity_) {
                memory_.erase(order_.front());
                order_.pop_front();
            }
        }
        return field;
    }

    [[nodiscard]] long hits() const {
        std::lock_guard lock(mutex_);
        return hits_;
    }
    [[nodiscard]] long solves() const {
        std::lock_guard lock(mutex_);
        return solves_;
    }
    [[nodiscard]] long disk_hits() const {
        std::lock_guard lock(mutex_);
        return disk_hits_;
    }

    [[nodiscard]] std::filesystem::path path_for(const ProblemSpec& spec) const {
        return directory_ / (hex64(spec_hash(spec)) + ".bin");
    }

private:
    FieldPtr load_or_solve(const ProblemSpec& spec, std::uint64_t) {
        if (!directory_.empty()) {
            const auto path = path_for(spec);
            if (std::filesystem::exists(path)) {
                try {
                    auto f = std::make_shared<const SolutionField>(load_field(path.string(), spec));
                    {
                        std::lock_guard lock(mutex_);
                        ++disk_hits_;
                    }
                    if (hook_) hook_(*f);
                    return f;
                } catch (const Error&) {
                    // unreadable or stale entry: fall through and re-solve
                }
            }
        }
        auto f = std::make_shared<const SolutionField>(solve(spec));
        {
            std::lock_guard lock(mutex_);
            ++solves_;
        }
        if (hook_) hook_(*f);
        if (!directory_.empty()) save_field(path_for(spec).string(), *f);
        return f;
    }

    void touch(std::uint64_t key) {
        order_.remove(key);
        order_.push_back(key);
    }

    std::size_t capacity_;
    std::filesystem::path directory_;
    mutable std::mutex mutex_;
    std::map<std::uint64_t, FieldPtr> memory_;
    std::list<std::uint64_t> order_;
    std::map<std::uint64_t, std::shared_future<FieldPtr>> in_flight_;
    std::function<void(const SolutionField&)> hook_;
    long hits_ = 0;
    long solves_ = 0;
    long disk_hits_ = 0;
};

/// Evaluates fn(0), ..., fn(count - 1) on at most `workers` threads. Results
/// land in index order; the first exception by index is rethrown.
template <class Fn>
auto parallel_map(std::size_t count, int workers, Fn fn) {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> out(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1 || count <= 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, count); ++t) pool.emplace_back(run);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace mertc
