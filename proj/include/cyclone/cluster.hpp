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
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cyclone/client.hpp"
#include "cyclone/medium.hpp"
#include "cyclone/multilog.hpp"
#include "cyclone/sim.hpp"
#include "cyclone/transport.hpp"

namespace cyclone {

/// Simulated CPU time charged per poll. Each instance has its own core.
struct CostModel {
    TimeNs recv = 1 * kMicros;
    TimeNs send = 1 * kMicros;
    TimeNs persist = 2 * kMicros;
    double persist_per_byte = 0.5;  // ns
    TimeNs apply = 500;
};

struct SimClusterConfig {
    std::size_t replicas = 3;
    std::uint16_t num_logs = 1;
    std::uint64_t seed = 1;
    SimNetConfig net;  // net.seed is derived from seed
    TimeNs election_min = 150 * kMillis;
    TimeNs election_max = 300 * kMillis;
    TimeNs heartbeat = 50 * kMillis;
    bool batching = true;
    bool colocate = true;
    TimeNs weak_timeout = 100 * kMillis;
    NvmConfig nvm{4ULL << 20, 1024, 9000};
    std::uint64_t flash_chunk = 1ULL << 20;
    TimeNs flash_latency = 20 * kMicros;
    bool cpu_model = true;
    CostModel cost;
    bool journal = false;  // per-key KV journals
};

/// Election timing used by the failover profile.
void apply_failover_profile(SimClusterConfig& c);

/**
 * A whole replica group and its clients on one event loop. Nodes are
 * numbered 1..replicas; clients from 1000.
 */
class SimCluster {
public:
    explicit SimCluster(SimClusterConfig config);
    ~SimCluster();
    SimCluster(const SimCluster&) = delete;
    SimCluster& operator=(const SimCluster&) = delete;

    EventLoop& loop() { return loop_; }
    SimNetwork& net() { return *net_; }
    [[nodiscard]] TimeNs now() const { return loop_.now(); }
    [[nodiscard]] const SimClusterConfig& config() const { return config_; }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] static NodeId node_id(std::size_t i) { return static_cast<NodeId>(i + 1); }
    [[nodiscard]] std::vector<NodeId> replica_ids() const;
    [[nodiscard]] bool alive(std::size_t i) const { return nodes_[i].node != nullptr; }
    Node& node(std::size_t i) { return *nodes_[i].node; }

    /// Crash: the node stops, its in-flight flash writes are lost, media stay.
    void kill(std::size_t i);
    /// Reopens the node from its media; the store is rebuilt by replay.
    void restart(std::size_t i);
    [[nodiscard]] std::size_t restarts() const { return restarts_; }

    std::size_t add_client(const std::function<void(ClientConfig&)>& tweak = {});
    Client& client(std::size_t k) { return clients_[k]->client; }
    [[nodiscard]] std::size_t num_clients() const { return clients_.size(); }
    /// Runs fn against client k now, then reschedules its timers.
    void with_client(std::size_t k, const std::function<void(Client&, TimeNs)>& fn);

    void run_until(TimeNs t) { loop_.run_until(t); }
    void run_for(TimeNs d) { loop_.run_until(loop_.now() + d); }
    /// Runs until every log has one leader whose whole log is applied on every
    /// live node, or `limit` passes. Returns whether that state was reached.
    bool run_until_quiescent(TimeNs limit);
    [[nodiscard]] bool quiescent() const;

    /// Alive node that leads `log` with the highest term.
    [[nodiscard]] std::optional<std::size_t> leader(std::uint16_t log) const;
    /// State hashes of live nodes.
    [[nodiscard]] std::vector<std::uint64_t> state_hashes() const;

    std::shared_ptr<MemoryMedium> nvm_medium(std::size_t i, std::uint16_t log) { return nodes_[i].nvm[log]; }
    std::shared_ptr<MemoryMedium> flash_medium(std::size_t i, std::uint16_t log) { return nodes_[i].flash[log]; }

    void set_poll_observer(std::function<void(std::size_t, std::uint16_t)> fn) { poll_observer_ = std::move(fn); }
    void set_gang_observer(std::function<void(const GangApplyEvent&)> fn);
    /// Total simulated busy time per node and log.
    [[nodiscard]] TimeNs busy_time(std::size_t i, std::uint16_t log) const { return nodes_[i].sched[log].busy_total; }

private:
    struct Sched {
        TimeNs busy_until = 0;
        TimeNs busy_total = 0;
        bool pending = false;
        TimeNs pending_at = 0;
        bool io_pending = false;
    };
    struct NodeSlot {
        std::unique_ptr<Node> node;
        SimEndpoint* endpoint = nullptr;
        std::vector<std::shared_ptr<MemoryMedium>> nvm;
        std::vector<std::shared_ptr<MemoryMedium>> flash;
        std::vector<Sched> sched;
        std::uint64_t generation = 0;
    };
    struct SimClient {
        SimClient(ClientConfig c, SimEndpoint& ep) : endpoint(ep), client(std::move(c), ep) {}
        SimEndpoint& endpoint;
        Client client;
        bool pending = false;
        TimeNs pending_at = 0;
    };

    void open_node(std::size_t i);
    void schedule_poll(std::size_t i, std::uint16_t log, TimeNs at);
    void run_poll(std::size_t i, std::uint16_t log);
    void drain(std::size_t i, std::uint16_t log);
    void schedule_client(std::size_t k);
    void client_arrival(std::size_t k);

    SimClusterConfig config_;
    EventLoop loop_;
    std::unique_ptr<SimNetwork> net_;
    std::vector<NodeSlot> nodes_;
    std::vector<std::unique_ptr<SimClient>> clients_;
    std::function<void(std::size_t, std::uint16_t)> poll_observer_;
    std::function<void(const GangApplyEvent&)> gang_observer_;
    std::size_t restarts_ = 0;
};

}  // namespace cyclone
