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

#include "cyclone/cluster.hpp"

#include <algorithm>
#include <limits>

namespace cyclone {

namespace {

constexpr TimeNs kNever = std::numeric_limits<TimeNs>::max();
constexpr NodeId kFirstClient = 1000;

}  // namespace

void apply_failover_profile(SimClusterConfig& c) {
    c.election_min = 40 * kMillis;
    c.election_max = 80 * kMillis;
    c.heartbeat = 10 * kMillis;
}

SimCluster::SimCluster(SimClusterConfig config) : config_(std::move(config)) {
    auto net = config_.net;
    net.seed = config_.seed * 0x9E3779B97F4A7C15ULL + 17;
    net_ = std::make_unique<SimNetwork>(loop_, net);
    nodes_.resize(config_.replicas);
    for (std::size_t i = 0; i < config_.replicas; ++i) {
        auto& slot = nodes_[i];
        slot.endpoint = &net_->attach(node_id(i), config_.num_logs);
        slot.endpoint->set_on_arrival([this, i](std::uint16_t log) {
            if (alive(i)) schedule_poll(i, log, loop_.now());
        });
        for (std::uint16_t l = 0; l < config_.num_logs; ++l) {
            slot.nvm.push_back(std::make_shared<MemoryMedium>());
            slot.flash.push_back(std::make_shared<MemoryMedium>());
        }
        open_node(i);
    }
}

SimCluster::~SimCluster() = default;

std::vector<NodeId> SimCluster::replica_ids() const {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < nodes_.size(); ++i) ids.push_back(node_id(i));
    return ids;
}

void SimCluster::open_node(std::size_t i) {
    auto& slot = nodes_[i];
    std::vector<std::unique_ptr<RaftLog>> logs;
    FlashConfig fc;
    fc.preallocate_chunk = config_.flash_chunk;
    fc.io = IoMode::Deferred;
    for (std::uint16_t l = 0; l < config_.num_logs; ++l) {
        auto nvm = NvmRegion::open(slot.nvm[l], config_.nvm);
        auto flash = Flashlog::open(slot.flash[l], fc);
        logs.push_back(std::make_unique<RaftLog>(std::move(nvm), std::move(flash)));
    }
    NodeConfig nc;
    nc.id = node_id(i);
    nc.replicas = replica_ids();
    nc.num_logs = config_.num_logs;
    nc.election_min = config_.election_min;
    nc.election_max = config_.election_max;
    nc.heartbeat = config_.heartbeat;
    nc.batching = config_.batching;
    nc.colocate = config_.colocate;
    nc.weak_timeout = config_.weak_timeout;
    nc.seed = config_.seed + 7919 * slot.generation;
    nc.nonce_clock = [this] { return loop_.now(); };
    slot.node = std::make_unique<Node>(std::move(nc), *slot.endpoint, std::move(logs), loop_.now());
    slot.node->store().enable_journal(config_.journal);
    slot.node->set_wake([this, i](std::uint16_t log) { schedule_poll(i, log, loop_.now()); });
    if (gang_observer_) slot.node->set_gang_observer(gang_observer_);
    slot.sched.assign(config_.num_logs, Sched{});
    for (std::uint16_t l = 0; l < config_.num_logs; ++l) schedule_poll(i, l, loop_.now());
}

void SimCluster::kill(std::size_t i) {
    auto& slot = nodes_[i];
    if (!slot.node) return;
    net_->set_up(node_id(i), false);
    slot.node.reset();
    ++slot.generation;
}

void SimCluster::restart(std::size_t i) {
    auto& slot = nodes_[i];
    if (slot.node) return;
    // Fresh media holding the crashed bytes, so nothing aliases the old node.
    for (std::uint16_t l = 0; l < config_.num_logs; ++l) {
        slot.nvm[l] = std::make_shared<MemoryMedium>(slot.nvm[l]->image());
        slot.flash[l] = std::make_shared<MemoryMedium>(slot.flash[l]->image());
    }
    ++slot.generation;
    ++restarts_;
    net_->set_up(node_id(i), true);
    open_node(i);
}

void SimCluster::set_gang_observer(std::function<void(const GangApplyEvent&)> fn) {
    gang_observer_ = std::move(fn);
    for (auto& s : nodes_) {
        if (s.node) s.node->set_gang_observer(gang_observer_);
    }
}

void SimCluster::schedule_poll(std::size_t i, std::uint16_t log, TimeNs at) {
    auto& slot = nodes_[i];
    if (!slot.node || at == kNever) return;
    auto& s = slot.sched[log];
    at = std::max({at, s.busy_until, loop_.now()});
    if (s.pending && s.pending_at <= at) return;
    s.pending = true;
    s.pending_at = at;
    loop_.at(at, [this, i, log, at, gen = slot.generation] {
        auto& sl = nodes_[i];
        if (sl.generation != gen || !sl.node) return;
        auto& st = sl.sched[log];
        if (!st.pending || st.pending_at != at) return;
        st.pending = false;
        run_poll(i, log);
    });
}

void SimCluster::run_poll(std::size_t i, std::uint16_t log) {
    auto& slot = nodes_[i];
    auto now = loop_.now();
    auto ps = slot.node->poll(log, now);
    if (poll_observer_) poll_observer_(i, log);
    if (!slot.node) return;  // the observer may kill nodes
    auto& s = slot.sched[log];
    if (config_.cpu_model) {
        const auto& c = config_.cost;
        auto cost = ps.received * c.recv + ps.sent * c.send + ps.persisted_entries * c.persist +
                    static_cast<TimeNs>(static_cast<double>(ps.persisted_bytes) * c.persist_per_byte) +
                    ps.applied_requests * c.apply;
        s.busy_until = now + cost;
        s.busy_total += cost;
    }
    drain(i, log);
    if (slot.node->has_input(log)) {
        schedule_poll(i, log, s.busy_until);
    } else {
        schedule_poll(i, log, slot.node->next_deadline(log));
    }
}

void SimCluster::drain(std::size_t i, std::uint16_t log) {
    auto& slot = nodes_[i];
    for (int k = 0; k < 16; ++k) {
        auto r = slot.node->drain(log);
        if (r.count == 0 && !r.flushed) break;
    }
    auto& flash = slot.node->instance(log).log().flash();
    auto& s = slot.sched[log];
    if (flash.outstanding() > 0 && !s.io_pending) {
        s.io_pending = true;
        loop_.after(config_.flash_latency, [this, i, log, gen = slot.generation] {
            auto& sl = nodes_[i];
            if (sl.generation != gen || !sl.node) return;
            sl.sched[log].io_pending = false;
            sl.node->instance(log).log().flash().run_io();
            drain(i, log);
        });
    }
}

std::size_t SimCluster::add_client(const std::function<void(ClientConfig&)>& tweak) {
    auto k = clients_.size();
    ClientConfig cc;
    cc.id = kFirstClient + static_cast<NodeId>(k);
    cc.replicas = replica_ids();
    cc.num_logs = config_.num_logs;
    if (tweak) tweak(cc);
    auto& ep = net_->attach(cc.id, 1);
    clients_.push_back(std::make_unique<SimClient>(cc, ep));
    ep.set_on_arrival([this, k](std::uint16_t) { client_arrival(k); });
    return k;
}

void SimCluster::client_arrival(std::size_t k) {
    auto& c = *clients_[k];
    for (auto& p : c.endpoint.recv_batch(0, SIZE_MAX)) c.client.on_packet(p, loop_.now());
    schedule_client(k);
}

void SimCluster::with_client(std::size_t k, const std::function<void(Client&, TimeNs)>& fn) {
    fn(clients_[k]->client, loop_.now());
    schedule_client(k);
}

void SimCluster::schedule_client(std::size_t k) {
    auto& c = *clients_[k];
    auto at = c.client.next_deadline();
    if (at == kNever) return;
    at = std::max(at, loop_.now());
    if (c.pending && c.pending_at <= at) return;
    c.pending = true;
    c.pending_at = at;
    loop_.at(at, [this, k, at] {
        auto& cl = *clients_[k];
        if (!cl.pending || cl.pending_at != at) return;
        cl.pending = false;
        cl.client.tick(loop_.now());
        schedule_client(k);
    });
}

std::optional<std::size_t> SimCluster::leader(std::uint16_t log) const {
    std::optional<std::size_t> best;
    std::uint64_t term = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!nodes_[i].node) continue;
        const auto& inst = nodes_[i].node->instance(log);
        if (inst.is_leader() && (!best || inst.term() > term)) {
            best = i;
            term = inst.term();
        }
    }
    return best;
}

bool SimCluster::quiescent() const {
    for (std::uint16_t l = 0; l < config_.num_logs; ++l) {
        auto li = leader(l);
        if (!li) return false;
        const auto& lead = nodes_[*li].node->instance(l);
        auto last = lead.log().last_index();
        if (lead.commit_index() != last) return false;
        for (const auto& s : nodes_) {
            if (!s.node) continue;
            const auto& inst = s.node->instance(l);
            if (inst.log().last_index() != last || inst.last_applied() != last) return false;
        }
    }
    return true;
}

bool SimCluster::run_until_quiescent(TimeNs limit) {
    auto deadline = loop_.now() + limit;
    while (loop_.now() < deadline) {
        if (quiescent()) return true;
        loop_.run_until(std::min(deadline, loop_.now() + 5 * kMillis));
    }
    return quiescent();
}

std::vector<std::uint64_t> SimCluster::state_hashes() const {
    std::vector<std::uint64_t> out;
    for (const auto& s : nodes_) {
        if (s.node) out.push_back(s.node->store().state_hash());
    }
    return out;
}

}  // namespace cyclone
