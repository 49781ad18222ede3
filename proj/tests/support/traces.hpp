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

namespace cyclone::testing {

struct TraceResult {
    bool ok = true;
    std::string detail;
    bool converged = false;
    std::size_t committed = 0;
    std::size_t leaders = 0;
    std::size_t ops = 0;
    std::size_t restarted = 0;  // replicas rebuilt from their logs during the trace
    std::uint64_t payload_copies = 0;

    void fail(std::string d) {
        if (ok) detail = std::move(d);
        ok = false;
    }
};

/**
 * Short randomized trace for the consensus invariants: drops up to 20%,
 * reordering, partitions and leader kills, with fast election timers.
 */
TraceResult run_raft_trace(std::uint64_t seed, std::size_t replicas);

/**
 * Three clients mixing quorum reads, weak reads, puts and deletes over a few
 * keys under faults; checks linearizability, weak-read guarantees and
 * convergence.
 */
TraceResult run_lin_trace(std::uint64_t seed, std::size_t ops_per_client = 66);

}  // namespace cyclone::testing
