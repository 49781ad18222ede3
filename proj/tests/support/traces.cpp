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

#include "support/traces.hpp"

#include "cyclone/cluster.hpp"
#include "support/raft_checker.hpp"
#include "support/workload.hpp"

namespace cyclone::testing {

namespace {

SimClusterConfig trace_config(std::uint64_t seed, std::size_t replicas) {
    SimClusterConfig c;
    c.seed = seed;
    c.replicas = replicas;
    c.nvm = NvmConfig{1 << 20, 256, 9000};
    c.flash_chunk = 256 << 10;
    c.election_min = 15 * kMillis;
    c.election_max = 30 * kMillis;
    c.heartbeat = 5 * kMillis;
    return c;
}

// Finishes a trace: waits out the faults, restarts the dead, lets it settle.
void settle(SimCluster& cl, TimeNs faults_end, TraceResult& r) {
    if (cl.now() < faults_end) cl.run_until(faults_end);
    restart_all(cl);
    if (!cl.run_until_quiescent(20 * kSeconds)) r.fail("no quiescence after faults healed");
    r.converged = hashes_equal(cl);
    if (!r.converged) r.fail("replica state hashes differ");
    r.restarted = cl.restarts();
}

TraceResult raft_trace(std::uint64_t seed, std::size_t replicas);
TraceResult lin_trace(std::uint64_t seed, std::size_t ops_per_client);

}  // namespace

TraceResult run_raft_trace(std::uint64_t seed, std::size_t replicas) {
    try {
        return raft_trace(seed, replicas);
    } catch (const std::exception& e) {
        TraceResult r;
        r.fail(std::string("exception: ") + e.what());
        return r;
    }
}

TraceResult run_lin_trace(std::uint64_t seed, std::size_t ops_per_client) {
    try {
        return lin_trace(seed, ops_per_client);
    } catch (const std::exception& e) {
        TraceResult r;
        r.fail(std::string("exception: ") + e.what());
        return r;
    }
}

namespace {

TraceResult raft_trace(std::uint64_t seed, std::size_t replicas) {
    TraceResult r;
    auto copies0 = copy_counters().payload_copies.load();
    Rng rng(seed * 7 + replicas);
    auto c = trace_config(seed, replicas);
    c.net.drop = rng.unit() * 0.2;
    c.net.reorder = rng.unit() * 0.3;
    SimCluster cl(c);
    RaftSafetyChecker raft(cl);

    MixConfig mix;
    mix.clients = 2;
    mix.ops_per_client = 30;
    mix.keys = 8;
    mix.read_pct = 20;
    mix.weak_pct = 10;
    mix.think_max = 1 * kMillis;
    HistoryDriver d(cl, mix, seed);

    FaultPlan plan;
    plan.start = 30 * kMillis;
    plan.end = plan.start + 600 * kMillis;
    plan.kills = rng.below(4);
    plan.leader_kills = rng.chance(0.8);
    plan.down_min = 20 * kMillis;
    plan.down_max = 150 * kMillis;
    plan.partitions = rng.below(3);
    plan.partition_max = 120 * kMillis;
    inject_faults(cl, plan, seed ^ 0x5eed);
    d.start();
    d.run(20 * kSeconds);
    settle(cl, plan.end + plan.down_max + plan.partition_max, r);
    raft.check_all();
    if (!raft.ok()) r.fail(raft.violations().front());
    r.committed = raft.committed(0);
    r.leaders = raft.leaders_seen();
    r.ops = d.history().size();
    r.payload_copies = copy_counters().payload_copies.load() - copies0;
    return r;
}

TraceResult lin_trace(std::uint64_t seed, std::size_t ops_per_client) {
    TraceResult r;
    auto copies0 = copy_counters().payload_copies.load();
    Rng rng(seed * 13 + 5);
    auto c = trace_config(seed, 3);
    c.election_min = 20 * kMillis;
    c.election_max = 40 * kMillis;
    c.journal = true;
    c.net.drop = rng.unit() * 0.05;
    c.net.reorder = rng.unit() * 0.2;
    SimCluster cl(c);
    RaftSafetyChecker raft(cl);

    MixConfig mix;
    mix.clients = 3;
    mix.ops_per_client = ops_per_client;
    mix.keys = 3;
    HistoryDriver d(cl, mix, seed);
    cl.run_for(100 * kMillis);

    FaultPlan plan;
    plan.start = cl.now();
    plan.end = plan.start + 500 * kMillis;
    plan.kills = 1 + rng.below(2);
    plan.down_max = 150 * kMillis;
    plan.partitions = rng.below(2);
    plan.partition_max = 100 * kMillis;
    inject_faults(cl, plan, seed ^ 0x11ea);
    d.start();
    if (!d.run(60 * kSeconds)) r.fail("clients did not finish");
    settle(cl, plan.end + plan.down_max + plan.partition_max, r);
    raft.check_all();
    if (!raft.ok()) r.fail(raft.violations().front());

    auto lin = check_linearizable(d.history());
    if (!lin.ok) r.fail("linearizability: " + lin.detail);
    if (cl.alive(0)) {
        auto weak = check_weak_reads(d.history(), timelines(cl.node(0).store().journal()));
        if (!weak.ok) r.fail("weak reads: " + weak.detail);
    }
    r.committed = raft.committed(0);
    r.leaders = raft.leaders_seen();
    r.ops = d.history().size();
    r.payload_copies = copy_counters().payload_copies.load() - copies0;
    return r;
}

}  // namespace

}  // namespace cyclone::testing
