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

#include <functional>
#include <string>
#include <vector>

#include "cyclone/cluster.hpp"
#include "support/history.hpp"

namespace cyclone::testing {

struct MixConfig {
    std::size_t clients = 3;
    std::size_t ops_per_client = 50;
    std::size_t keys = 4;
    double read_pct = 30;
    double weak_pct = 20;
    double delete_pct = 5;
    TimeNs think_max = 2 * kMillis;
};

/**
 * Closed-loop random clients that record a history. Every written value is
 * unique so reads identify the write they observed.
 */
class HistoryDriver {
public:
    HistoryDriver(SimCluster& cluster, MixConfig mix, std::uint64_t seed);

    /// Issues the first op of every client.
    void start();
    [[nodiscard]] bool done() const { return finished_ == clients_.size(); }
    /// Runs until every client has finished or `limit` passes.
    bool run(TimeNs limit);
    [[nodiscard]] const std::vector<HistOp>& history() const { return history_; }

private:
    struct ClientState {
        std::size_t index = 0;
        std::size_t issued = 0;
    };
    void issue(std::size_t c);

    SimCluster& cluster_;
    MixConfig mix_;
    Rng rng_;
    std::vector<ClientState> clients_;
    std::vector<HistOp> history_;
    std::size_t finished_ = 0;
};

struct FaultPlan {
    TimeNs start = 0;
    TimeNs end = 0;
    std::size_t kills = 0;
    bool leader_kills = true;  // kill the current leader of a random log, else a random node
    TimeNs down_min = 20 * kMillis;
    TimeNs down_max = 200 * kMillis;
    std::size_t partitions = 0;
    TimeNs partition_max = 150 * kMillis;
};

/**
 * Schedules kills, restarts and partition windows on the cluster's loop.
 * A kill is skipped when it would leave less than a majority alive. Every
 * killed node is restarted before `end + down_max`.
 */
void inject_faults(SimCluster& cluster, const FaultPlan& plan, std::uint64_t seed);

/// Restarts every dead node.
void restart_all(SimCluster& cluster);

/// All live replicas hold the same KV state.
bool hashes_equal(SimCluster& cluster);

}  // namespace cyclone::testing
