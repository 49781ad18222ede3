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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cyclone/common.hpp"
#include "cyclone/sim.hpp"
#include "cyclone/wire.hpp"

namespace cyclone {

struct WorkloadMix {
    double update_pct = 100;
    double read_pct = 0;
    double weak_read_pct = 0;
};

/// Discrete size distribution: (size in bytes, weight).
struct SizeDist {
    std::vector<std::pair<std::uint32_t, double>> buckets{{8, 1.0}};

    std::uint32_t sample(Rng& rng) const;
    [[nodiscard]] double mean() const;
    /// Fraction of bytes carried by items smaller than `limit`.
    [[nodiscard]] double byte_share_below(std::uint32_t limit) const;
};

/**
 * A synthetic, paper-shaped workload. Key and value contents are generated;
 * only the mix and the size shape follow the published experiments.
 */
struct WorkloadSpec {
    std::string name = "update100";
    WorkloadMix mix;
    std::uint64_t keys = 1'000'000;
    std::uint32_t key_size = 8;
    SizeDist value_size;
    std::size_t clients = 64;
    TimeNs warmup = 20 * kMillis;
    TimeNs duration = 100 * kMillis;

    /// Throws ContractViolation when the mix does not sum to 100.
    void validate() const;
};

/// update100, update100-256, readheavy95, writeheavy80, valuesize.
WorkloadSpec preset(const std::string& name);
std::vector<std::string> preset_names();

struct BenchClusterConfig {
    std::string transport = "sim";  // sim | udp
    std::size_t replicas = 3;
    std::uint16_t logs = 1;
    bool batching = true;
    std::uint64_t seed = 1;
    /// Client counts for an offered-load sweep; empty runs the spec once.
    std::vector<std::size_t> sweep;
    std::string host = "127.0.0.1";  // udp only
};

struct LatencySummary {
    std::uint64_t count = 0;
    double mean_us = 0;
    double p50_us = 0;
    double p99_us = 0;
    double max_us = 0;

    static LatencySummary of(std::vector<TimeNs> samples);
};

struct PhaseStats {
    std::string name;
    LatencySummary latency;
};

struct SweepPoint {
    std::size_t clients = 0;
    double throughput = 0;
    LatencySummary latency;
};

struct BenchReport {
    WorkloadSpec spec;
    BenchClusterConfig cluster;
    double throughput = 0;  // completed ops per second in the measured window
    LatencySummary latency;
    std::vector<PhaseStats> phases;  // per operation kind
    std::uint64_t errors = 0;        // ops that ended in a non-success status
    std::uint64_t payload_copies = 0;
    std::vector<SweepPoint> sweep;
    std::string clock;  // "sim" or "wall"

    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

/// Throws ClusterUnavailable when the cluster never elects leaders.
BenchReport run_bench(const WorkloadSpec& spec, const BenchClusterConfig& cluster);

struct FailoverConfig {
    std::uint64_t seed = 1;
    std::size_t replicas = 3;
    std::size_t clients = 8;
    TimeNs kill_at = 500 * kMillis;
    TimeNs observe = 500 * kMillis;  // after the kill
    TimeNs bucket = 5 * kMillis;
    bool kill_follower = false;
    bool restart = true;  // bring the victim back and check convergence
};

struct FailoverReport {
    FailoverConfig config;
    TimeNs kill_at = 0;
    TimeNs gap = 0;  // longest completion-free interval ending after the kill
    NodeId victim = 0;
    NodeId new_leader = 0;
    bool converged = false;
    std::vector<std::uint64_t> completions;  // per bucket, from time 0

    [[nodiscard]] std::string to_json() const;
};

/// Simulated 3-replica run with the failover timing profile.
FailoverReport run_failover(const FailoverConfig& config);

}  // namespace cyclone
