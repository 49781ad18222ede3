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

#include "cyclone/udp_cluster.hpp"

#include <algorithm>
#include <chrono>

#include "cyclone/flashlog.hpp"
#include "cyclone/medium.hpp"
#include "cyclone/nvm_log.hpp"

namespace cyclone {

TimeNs wall_now() {
    static const auto start = std::chrono::steady_clock::now();
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
}

UdpCluster::UdpCluster(UdpClusterConfig config) : config_(std::move(config)) {
    for (std::size_t i = 0; i < config_.replicas; ++i) {
        auto r = std::make_unique<Replica>();
        r->transport = std::make_unique<UdpTransport>(static_cast<NodeId>(i + 1), config_.host, 0, config_.num_logs);
        replicas_.push_back(std::move(r));
    }
    for (auto& a : replicas_) {
        for (std::size_t j = 0; j < replicas_.size(); ++j) {
            a->transport->add_peer(static_cast<NodeId>(j + 1), config_.host, replicas_[j]->transport->port());
        }
    }
    auto ids = replica_ids();
    for (std::size_t i = 0; i < replicas_.size(); ++i) {
        std::vector<std::unique_ptr<RaftLog>> logs;
        FlashConfig fc;
        fc.preallocate_chunk = 4ULL << 20;
        for (std::uint16_t l = 0; l < config_.num_logs; ++l) {
            auto nvm = NvmRegion::open(std::make_shared<MemoryMedium>(), NvmConfig{16ULL << 20, 4096, 9000});
            auto flash = Flashlog::open(std::make_shared<MemoryMedium>(), fc);
            logs.push_back(std::make_unique<RaftLog>(std::move(nvm), std::move(flash)));
        }
        NodeConfig nc;
        nc.id = ids[i];
        nc.replicas = ids;
        nc.num_logs = config_.num_logs;
        nc.election_min = config_.election_min;
        nc.election_max = config_.election_max;
        nc.heartbeat = config_.heartbeat;
        nc.batching = config_.batching;
        nc.seed = config_.seed;
        nc.nonce_clock = [] { return static_cast<std::uint64_t>(wall_now()); };
        replicas_[i]->node = std::make_unique<Node>(std::move(nc), *replicas_[i]->transport, std::move(logs), wall_now());
    }
}

UdpCluster::~UdpCluster() { stop(); }

std::vector<NodeId> UdpCluster::replica_ids() const {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < config_.replicas; ++i) ids.push_back(static_cast<NodeId>(i + 1));
    return ids;
}

UdpTransport& UdpCluster::add_client_transport(NodeId id) {
    auto t = std::make_unique<UdpTransport>(id, config_.host, 0, 1);
    for (std::size_t j = 0; j < replicas_.size(); ++j) {
        t->add_peer(static_cast<NodeId>(j + 1), config_.host, replicas_[j]->transport->port());
        replicas_[j]->transport->add_peer(id, config_.host, t->port());
    }
    clients_.push_back(std::move(t));
    return *clients_.back();
}

void UdpCluster::start() {
    if (running_.exchange(true)) return;
    for (auto& r : replicas_) r->thread = std::thread([this, p = r.get()] { run(*p); });
}

void UdpCluster::stop() {
    if (!running_.exchange(false)) return;
    for (auto& r : replicas_) {
        if (r->thread.joinable()) r->thread.join();
    }
}

void UdpCluster::run(Replica& r) {
    auto& node = *r.node;
    auto& t = *r.transport;
    while (running_.load(std::memory_order_relaxed)) {
        auto now = wall_now();
        t.pump();
        TimeNs next = now + kMillis;
        bool busy = false;
        for (std::uint16_t l = 0; l < config_.num_logs; ++l) {
            bool input = node.has_input(l);
            if (input || now >= node.next_deadline(l)) node.poll(l, now);
            for (int k = 0; k < 4; ++k) {
                auto d = node.drain(l);
                if (d.count == 0 && !d.flushed) break;
            }
            node.instance(l).log().flash().run_io();
            busy = busy || node.has_input(l);
            next = std::min(next, node.next_deadline(l));
        }
        if (!busy && next > now) t.wait_readable(std::min<TimeNs>(next - now, kMillis));
    }
}

std::vector<std::uint64_t> UdpCluster::state_hashes() const {
    std::vector<std::uint64_t> out;
    for (const auto& r : replicas_) out.push_back(r->node->store().state_hash());
    return out;
}

}  // namespace cyclone
