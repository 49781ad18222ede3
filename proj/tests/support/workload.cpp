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

#include "support/workload.hpp"

#include <algorithm>

namespace cyclone::testing {

HistoryDriver::HistoryDriver(SimCluster& cluster, MixConfig mix, std::uint64_t seed)
    : cluster_(cluster), mix_(mix), rng_(seed) {
    for (std::size_t c = 0; c < mix_.clients; ++c) clients_.push_back({cluster_.add_client(), 0});
}

void HistoryDriver::start() {
    for (std::size_t c = 0; c < clients_.size(); ++c) issue(c);
}

bool HistoryDriver::run(TimeNs limit) {
    auto deadline = cluster_.now() + limit;
    while (!done() && cluster_.now() < deadline) cluster_.run_for(5 * kMillis);
    return done();
}

void HistoryDriver::issue(std::size_t c) {
    auto& cs = clients_[c];
    if (cs.issued == mix_.ops_per_client) {
        ++finished_;
        return;
    }
    ++cs.issued;
    HistOp op;
    op.client = cluster_.client(cs.index).config().id;
    op.key = "key" + std::to_string(rng_.below(mix_.keys));
    double roll = rng_.unit() * 100;
    if (roll < mix_.read_pct) {
        op.kind = HistKind::Get;
    } else if (roll < mix_.read_pct + mix_.weak_pct) {
        op.kind = HistKind::WeakGet;
    } else if (roll < mix_.read_pct + mix_.weak_pct + mix_.delete_pct) {
        op.kind = HistKind::Delete;
    } else {
        op.kind = HistKind::Put;
        op.value = "c" + std::to_string(op.client) + "-" + std::to_string(cs.issued);
    }
    auto slot = history_.size();
    history_.push_back(op);
    auto think = rng_.below(mix_.think_max + 1);
    cluster_.loop().after(think, [this, c, slot] {
        cluster_.with_client(clients_[c].index, [this, c, slot](Client& cl, TimeNs now) {
            auto& h = history_[slot];
            h.invoke = now;
            auto cb = [this, c, slot](const ClientResult& r) {
                auto& h = history_[slot];
                h.response = r.end;
                h.status = r.status;
                h.attempts = r.attempts;
                h.completed = r.status == Status::Ok || r.status == Status::NotFound;
                if (h.kind == HistKind::Get || h.kind == HistKind::WeakGet) h.value = r.value;
                // Issue the next op from a fresh event, outside the client callback.
                cluster_.loop().after(0, [this, c] { issue(c); });
            };
            switch (h.kind) {
                case HistKind::Put: cl.put(h.key, h.value, now, cb); break;
                case HistKind::Delete: cl.del(h.key, now, cb); break;
                case HistKind::Get: cl.get(h.key, now, cb); break;
                case HistKind::WeakGet: cl.weak_get(h.key, now, cb); break;
            }
        });
    });
}

void inject_faults(SimCluster& cluster, const FaultPlan& plan, std::uint64_t seed) {
    Rng rng(seed);
    auto span = plan.end > plan.start ? plan.end - plan.start : 1;
    auto majority = cluster.size() / 2 + 1;
    for (std::size_t k = 0; k < plan.kills; ++k) {
        auto at = plan.start + rng.below(span);
        auto down = rng.between(plan.down_min, plan.down_max + 1);
        auto pick = rng.next();
        bool leader = plan.leader_kills;
        cluster.loop().at(at, [&cluster, down, pick, leader, majority] {
            std::size_t alive = 0;
            for (std::size_t i = 0; i < cluster.size(); ++i) alive += cluster.alive(i) ? 1 : 0;
            if (alive <= majority) return;
            std::optional<std::size_t> victim;
            if (leader) victim = cluster.leader(static_cast<std::uint16_t>(pick % cluster.config().num_logs));
            if (!victim) {
                std::vector<std::size_t> live;
                for (std::size_t i = 0; i < cluster.size(); ++i) {
                    if (cluster.alive(i)) live.push_back(i);
                }
                victim = live[(pick >> 8) % live.size()];
            }
            auto v = *victim;
            cluster.kill(v);
            cluster.loop().after(down, [&cluster, v] { cluster.restart(v); });
        });
    }
    auto ids = cluster.replica_ids();
    for (std::size_t k = 0; k < plan.partitions; ++k) {
        PartitionWindow w;
        w.start = plan.start + rng.below(span);
        w.end = w.start + rng.between(plan.partition_max / 4, plan.partition_max + 1);
        auto size = 1 + rng.below(std::max<std::size_t>(ids.size() / 2, 1));
        auto shuffled = ids;
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        w.side.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(size));
        cluster.net().add_partition(std::move(w));
    }
}

void restart_all(SimCluster& cluster) {
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        if (!cluster.alive(i)) cluster.restart(i);
    }
}

bool hashes_equal(SimCluster& cluster) {
    auto h = cluster.state_hashes();
    return std::adjacent_find(h.begin(), h.end(), std::not_equal_to<>()) == h.end();
}

}  // namespace cyclone::testing
