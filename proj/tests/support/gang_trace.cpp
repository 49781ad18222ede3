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

#include "support/gang_trace.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cyclone/cluster.hpp"
#include "support/workload.hpp"

namespace cyclone::testing {

namespace {

struct GangOp {
    std::size_t client = 0;
    std::vector<GangItem> items;
    std::size_t participants = 0;
    bool done = false;
    ClientResult result;
    std::uint64_t op_id = 0;
};

// Keys routed to each log, a few per log so gangs overlap.
std::vector<std::vector<std::string>> keys_by_log(std::uint16_t logs, std::size_t per_log) {
    std::vector<std::vector<std::string>> out(logs);
    for (std::size_t n = 0; std::any_of(out.begin(), out.end(), [&](auto& v) { return v.size() < per_log; }); ++n) {
        auto k = "gk" + std::to_string(n);
        auto& v = out[route(k, logs)];
        if (v.size() < per_log) v.push_back(k);
    }
    return out;
}

}  // namespace

GangTraceResult run_gang_trace(const GangTraceConfig& gc) {
    GangTraceResult res;
    auto copies0 = copy_counters().payload_copies.load();
    Rng rng(gc.seed);
    SimClusterConfig c;
    c.seed = gc.seed;
    c.num_logs = gc.logs;
    c.journal = true;
    c.net.drop = gc.drop;
    c.nvm = NvmConfig{1 << 20, 256, 9000};
    apply_failover_profile(c);
    SimCluster cl(c);

    // (client id, op id) -> highest attempt number that a coordinator failed
    std::map<std::pair<NodeId, std::uint64_t>, std::uint64_t> failed;
    std::set<std::string> failed_nonces;
    cl.set_gang_observer([&](const GangApplyEvent& e) {
        if (e.outcome != GangOutcome::Failed || e.log != 0) return;
        if (!failed_nonces.insert(nonce_hex(e.nonce)).second) return;
        auto& f = failed[{e.client, e.req_id >> 8}];
        f = std::max<std::uint64_t>(f, e.req_id & 0xFF);
    });

    auto keys = keys_by_log(gc.logs, 3);
    std::vector<GangOp> ops;
    std::vector<std::size_t> client_idx;
    for (std::size_t k = 0; k < gc.clients; ++k) client_idx.push_back(cl.add_client());
    for (std::size_t k = 0; k < gc.clients; ++k) {
        for (std::size_t n = 0; n < gc.gangs_per_client; ++n) {
            GangOp op;
            op.client = k;
            auto want = 2 + rng.below(gc.logs - 1);  // 2..logs participants, log 0 always one
            std::vector<std::uint16_t> logs{0};
            std::vector<std::uint16_t> rest;
            for (std::uint16_t l = 1; l < gc.logs; ++l) rest.push_back(l);
            for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);
            logs.insert(logs.end(), rest.begin(), rest.begin() + static_cast<long>(want - 1));
            auto tag = "g" + std::to_string(k) + "-" + std::to_string(n);
            // log 0 joins as coordinator; give it an item half of the time
            for (auto l : logs) {
                if (l == 0 && rng.chance(0.5)) continue;
                op.items.push_back({Op::Put, keys[l][rng.below(keys[l].size())], tag});
            }
            op.participants = logs.size();
            ops.push_back(std::move(op));
        }
    }
    res.gangs = ops.size();
    res.min_participants = SIZE_MAX;
    for (const auto& op : ops) {
        res.min_participants = std::min(res.min_participants, op.participants);
        res.max_participants = std::max(res.max_participants, op.participants);
    }

    // one closed loop per client
    std::vector<std::size_t> next(gc.clients, 0);
    std::function<void(std::size_t)> issue = [&](std::size_t k) {
        std::size_t idx = SIZE_MAX;
        for (std::size_t seen = 0, i = 0; i < ops.size(); ++i) {
            if (ops[i].client != k) continue;
            if (seen++ == next[k]) {
                idx = i;
                break;
            }
        }
        if (idx == SIZE_MAX) return;
        ++next[k];
        cl.with_client(client_idx[k], [&, idx, k](Client& client, TimeNs now) {
            ops[idx].op_id = client.next_op_id();
            client.gang(ops[idx].items, now, [&, idx, k](const ClientResult& r) {
                ops[idx].done = true;
                ops[idx].result = r;
                cl.loop().after(rng.below(3 * kMillis), [&, k] { issue(k); });
            });
        });
    };

    cl.run_for(1 * kSeconds);  // initial elections and co-location
    // Kill a node in the middle of a gang: while it holds a pending barrier
    // slot, at a random poll.
    std::size_t kills_left = gc.kills;
    TimeNs quiet_until = 0;
    TimeNs last_restart = cl.now();
    cl.set_poll_observer([&](std::size_t i, std::uint16_t) {
        if (kills_left == 0 || cl.now() < quiet_until || !cl.alive(i)) return;
        if ((cl.node(i).barriers().size() == 0 && !cl.node(i).gang_in_flight()) || !rng.chance(0.3)) return;
        std::size_t alive = 0;
        for (std::size_t n = 0; n < cl.size(); ++n) alive += cl.alive(n) ? 1 : 0;
        if (alive <= cl.size() / 2 + 1) return;
        --kills_left;
        ++res.kills;
        cl.kill(i);
        auto down = rng.between(50 * kMillis, 300 * kMillis);
        quiet_until = cl.now() + down + 200 * kMillis;
        last_restart = std::max(last_restart, cl.now() + down);
        cl.loop().after(down, [&cl, i] { cl.restart(i); });
    });
    for (std::size_t k = 0; k < gc.clients; ++k) issue(k);

    auto deadline = cl.now() + 60 * kSeconds;
    auto all_done = [&] { return std::all_of(ops.begin(), ops.end(), [](const GangOp& o) { return o.done; }); };
    while (!all_done() && cl.now() < deadline) cl.run_for(10 * kMillis);
    cl.set_poll_observer({});
    if (cl.now() < last_restart) cl.run_until(last_restart);
    restart_all(cl);
    bool quiet = cl.run_until_quiescent(20 * kSeconds);
    cl.run_for(200 * kMillis);
    res.converged = quiet && hashes_equal(cl);

    auto fail = [&](std::string why) {
        if (res.ok) res.detail = std::move(why);
        res.ok = false;
    };
    if (!all_done()) fail("gang operations still pending: barrier deadlock or livelock");
    if (!quiet) fail("cluster did not quiesce");
    for (std::size_t i = 0; i < cl.size(); ++i) {
        if (cl.node(i).barriers().size() != 0) fail("barrier slots left on node " + std::to_string(i + 1));
    }

    for (std::size_t i = 0; i < cl.size(); ++i) {
        auto journal = cl.node(i).store().journal();
        for (const auto& op : ops) {
            std::size_t applied = 0;
            for (const auto& it : op.items) {
                const auto& v = journal[it.key];
                if (std::find(v.begin(), v.end(), "P:" + it.value) != v.end()) ++applied;
            }
            if (applied != 0 && applied != op.items.size()) {
                fail("partial gang " + op.items.front().value + " on node " + std::to_string(i + 1));
            }
            if (op.done && op.result.status == Status::Ok && applied == 0) {
                fail("acknowledged gang " + op.items.front().value + " missing on node " + std::to_string(i + 1));
            }
        }
    }
    for (const auto& op : ops) {
        if (op.done) {
            res.succeeded += op.result.status == Status::Ok ? 1 : 0;
            if (op.result.status != Status::Ok) fail("gang ended with " + std::string(to_string(op.result.status)));
        }
    }
    res.failed_outcomes = failed_nonces.size();
    for (const auto& [key, attempt] : failed) {
        auto client = key.first;
        auto it = std::find_if(ops.begin(), ops.end(), [&](const GangOp& o) {
            return cl.client(client_idx[o.client]).config().id == client && o.op_id == key.second;
        });
        if (it == ops.end()) {
            fail("failed activation for an unknown operation");
        } else if (it->result.attempts <= attempt) {
            fail("client never retried after a failed activation");
        }
    }
    for (auto k : client_idx) res.retries_seen += cl.client(k).stats().gang_retries;
    res.payload_copies = copy_counters().payload_copies.load() - copies0;
    if (!res.converged && res.ok) fail("replica state hashes differ");
    return res;
}

}  // namespace cyclone::testing
