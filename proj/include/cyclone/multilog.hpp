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
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "cyclone/ganged.hpp"
#include "cyclone/kv.hpp"
#include "cyclone/raft.hpp"
#include "cyclone/transport.hpp"

namespace cyclone {

/// FNV-1a 64 of the key, modulo num_logs.
std::uint16_t route(ByteSpan key, std::uint16_t num_logs);
std::uint16_t route(std::string_view key, std::uint16_t num_logs);

struct NodeConfig {
    NodeId id = 0;
    std::vector<NodeId> replicas;
    std::uint16_t num_logs = 1;
    TimeNs election_min = 150 * kMillis;
    TimeNs election_max = 300 * kMillis;
    TimeNs heartbeat = 50 * kMillis;
    bool batching = true;
    bool colocate = true;
    TimeNs weak_timeout = 100 * kMillis;
    std::uint64_t seed = 1;
    std::uint64_t machine_id = 0;  // nonce prefix; defaults to the node id
    std::function<std::uint64_t()> nonce_clock;
};

/// Work done by one poll, for the simulator's CPU model.
struct PollStats {
    std::size_t received = 0;
    std::size_t sent = 0;
    std::size_t persisted_entries = 0;
    std::size_t persisted_bytes = 0;
    std::size_t applied_requests = 0;
    std::size_t proposed_requests = 0;
};

struct NodeStats {
    std::uint64_t redirects = 0;
    std::uint64_t dropped_requests = 0;
    std::uint64_t log_full_rejects = 0;
    std::uint64_t weak_served = 0;
    std::uint64_t weak_parked = 0;
    std::uint64_t weak_timeouts = 0;
    std::uint64_t stale_rejects = 0;
    std::uint64_t campaign_hints = 0;
    std::uint64_t gangs_dispatched = 0;
    std::uint64_t gangs_succeeded = 0;
    std::uint64_t gangs_failed = 0;
    std::uint64_t gang_retries_sent = 0;
    std::uint64_t not_colocated = 0;
};

/// Emitted once per applied ganged entry per log, for test checkers.
struct GangApplyEvent {
    NodeId node = 0;
    std::uint16_t log = 0;
    NonceBytes nonce{};
    GangOutcome outcome = GangOutcome::Pending;
    std::size_t participants = 0;
    NodeId client = 0;
    std::uint64_t req_id = 0;
};

/**
 * One replica: N RAFT instances over one transport endpoint, one KV store,
 * one barrier table. The driver (simulator or UDP loop) calls poll(i) for
 * each instance whenever it has input or a timer is due, then drain(i).
 */
class Node final : public RaftHost {
public:
    Node(NodeConfig config, Transport& transport, std::vector<std::unique_ptr<RaftLog>> logs, TimeNs now);
    ~Node() override;

    PollStats poll(std::uint16_t log, TimeNs now);
    [[nodiscard]] TimeNs next_deadline(std::uint16_t log) const;
    [[nodiscard]] bool has_input(std::uint16_t log) const;
    DrainResult drain(std::uint16_t log, std::size_t max_entries = 64);

    /// Called whenever another instance gets local work (gang fan-out).
    void set_wake(std::function<void(std::uint16_t)> wake) { wake_ = std::move(wake); }
    void set_gang_observer(std::function<void(const GangApplyEvent&)> fn) { gang_observer_ = std::move(fn); }

    [[nodiscard]] bool colocated() const;
    [[nodiscard]] std::uint16_t num_logs() const { return config_.num_logs; }
    [[nodiscard]] NodeId id() const { return config_.id; }
    RaftInstance& instance(std::uint16_t log) { return *instances_[log]; }
    [[nodiscard]] const RaftInstance& instance(std::uint16_t log) const { return *instances_[log]; }
    KvStore& store() { return store_; }
    BarrierTable& barriers() { return barriers_; }
    /// A ganged operation dispatched by this coordinator has not resolved yet.
    [[nodiscard]] bool gang_in_flight() const { return gang_in_flight_.has_value(); }
    [[nodiscard]] const NodeStats& stats() const { return stats_; }
    [[nodiscard]] const NodeConfig& config() const { return config_; }

    ApplyResult apply(RaftInstance& inst, std::uint64_t index, std::uint64_t term, const PayloadHandle& body) override;
    void on_role_change(RaftInstance& inst) override;

private:
    class CountingTransport;

    struct WeakRead {
        PayloadHandle request;
        std::uint64_t wait_index = 0;
        TimeNs deadline = 0;
    };
    struct GangWork {
        PayloadChain body;
        std::uint64_t view_term = 0;
        NodeId client = 0;
        std::uint64_t req_id = 0;
    };
    struct PendingGang {
        PayloadHandle request;
        TimeNs arrived = 0;
    };

    void handle_client(std::uint16_t log, const Packet& p, TimeNs now, std::vector<PayloadHandle>& batch);
    void propose_batch(std::uint16_t log, std::vector<PayloadHandle>& batch, TimeNs now, PollStats& ps);
    void serve_weak(std::uint16_t log, TimeNs now);
    void dispatch_gang(TimeNs now);
    void run_gang_inbox(std::uint16_t log, TimeNs now);
    void enforce_colocation(std::uint16_t log, TimeNs now);
    void settle();
    void execute_gang(BarrierTable::Slot& s);

    void respond(std::uint16_t log, NodeId client, const Response& r);
    void respond(std::uint16_t log, const RequestView& req, Status status, std::string value = {});
    void redirect(std::uint16_t log, const RequestView& req, NodeId leader);

    NodeConfig config_;
    std::unique_ptr<CountingTransport> transport_;
    std::vector<std::unique_ptr<RaftInstance>> instances_;
    KvStore store_;
    BarrierTable barriers_;
    NonceGenerator nonces_;
    std::vector<std::deque<WeakRead>> weak_;
    std::vector<std::deque<GangWork>> gang_inbox_;
    std::deque<PendingGang> gang_queue_;
    std::optional<NonceBytes> gang_in_flight_;
    std::vector<bool> blocked_;    // apply stopped at an unresolved gang
    std::vector<bool> hint_sent_;  // campaign hint sent for the current transfer
    std::function<void(std::uint16_t)> wake_;
    std::function<void(const GangApplyEvent&)> gang_observer_;
    TimeNs now_ = 0;
    std::size_t applied_in_poll_ = 0;
    NodeStats stats_;
};

}  // namespace cyclone
