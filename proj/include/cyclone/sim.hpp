// Copyright 2026 The Cyclone Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <vector>

#include "cyclone/common.hpp"

namespace cyclone {

/// Seeded generator with explicit distribution mappings, so a seed yields the
/// same stream regardless of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }
    /// Uniform in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }
    /// Uniform in [lo, hi).
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo); }
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return p > 0 && unit() < p; }
    double exponential(double mean) { return -mean * std::log1p(-unit()); }
    Rng fork() { return Rng(gen_() ^ 0x9E3779B97F4A7C15ULL); }

private:
    std::mt19937_64 gen_;
};

/**
 * Discrete-event loop over virtual time. Events at the same instant run in
 * scheduling order.
 */
class EventLoop {
public:
    using Task = std::function<void()>;

    [[nodiscard]] TimeNs now() const { return now_; }
    void at(TimeNs when, Task task);
    void after(TimeNs delay, Task task) { at(now_ + delay, std::move(task)); }

    /// Runs events up to and including `until`, then sets the clock to it.
    void run_until(TimeNs until);
    /// Runs a single event; false if none is pending.
    bool step();
    [[nodiscard]] bool idle() const { return queue_.empty(); }
    [[nodiscard]] std::uint64_t executed() const { return executed_; }
    [[nodiscard]] std::size_t pending() const { return queue_.size(); }

private:
    struct Event {
        TimeNs when;
        std::uint64_t seq;
        Task task;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.when != b.when ? a.when > b.when : a.seq > b.seq;
        }
    };

    TimeNs now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t executed_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

}  // namespace cyclone
