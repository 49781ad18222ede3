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

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cyclone/payload.hpp"
#include "cyclone/sim.hpp"
#include "cyclone/wire.hpp"

namespace cyclone {

/**
 * A datagram: a per-destination header plus a chain of shared payload
 * handles. Copying a Packet copies the header and bumps payload refcounts.
 */
struct Packet {
    NodeId src = 0;
    NodeId dst = 0;
    Bytes header;
    PayloadChain payload;

    [[nodiscard]] std::size_t size() const { return header.size() + chain_size(payload); }
};

/// Reads the instance id and message type from the common header.
std::uint16_t packet_instance(const Packet& p);
MsgType packet_type(const Packet& p);

/// Per-instance receive queues.
class InboundQueues {
public:
    explicit InboundQueues(std::size_t instances) : queues_(std::max<std::size_t>(instances, 1)) {}

    void push(Packet p);
    std::vector<Packet> pop(std::uint16_t instance, std::size_t max);
    [[nodiscard]] std::size_t size(std::uint16_t instance) const;
    void clear();
    [[nodiscard]] std::size_t route(std::uint16_t instance) const {
        return instance < queues_.size() ? instance : 0;
    }

private:
    std::vector<std::deque<Packet>> queues_;
};

class Transport {
public:
    virtual ~Transport() = default;

    [[nodiscard]] virtual NodeId self() const = 0;
    /// Enqueues and flushes one datagram. Throws SendTooLarge above the MTU.
    virtual void send(Packet p) = 0;
    /// Returns immediately with whatever is queued for `instance`, at most max.
    virtual std::vector<Packet> recv_batch(std::uint16_t instance, std::size_t max = kMaxBatch) = 0;
    [[nodiscard]] virtual std::size_t queued(std::uint16_t instance) const = 0;
    [[nodiscard]] virtual std::size_t mtu() const { return kMtu; }

    /// One header per destination, all chained to the same payload handles.
    void send_multicast(const PayloadChain& payload, std::span<const NodeId> dests,
                        const std::function<Bytes(NodeId)>& header_fn);
};

// ---------------------------------------------------------------------------
// Simulator

struct PartitionWindow {
    TimeNs start = 0;
    TimeNs end = 0;
    std::vector<NodeId> side;  // nodes in `side` cannot reach nodes outside it
};

struct SimNetConfig {
    std::uint64_t seed = 1;
    TimeNs base_delay = 5 * kMicros;
    double jitter_mean_ns = 1000.0;  // exponential
    double drop = 0.0;
    double reorder = 0.0;
    TimeNs reorder_extra = 50 * kMicros;  // upper bound of the extra delay of a reordered packet
    std::vector<PartitionWindow> partitions;
    std::size_t mtu = kMtu;
};

class SimNetwork;

class SimEndpoint final : public Transport {
public:
    SimEndpoint(SimNetwork& net, NodeId id, std::size_t instances) : net_(net), id_(id), inbound_(instances) {}

    [[nodiscard]] NodeId self() const override { return id_; }
    void send(Packet p) override;
    std::vector<Packet> recv_batch(std::uint16_t instance, std::size_t max = kMaxBatch) override;
    [[nodiscard]] std::size_t queued(std::uint16_t instance) const override { return inbound_.size(instance); }
    [[nodiscard]] std::size_t mtu() const override;

    /// Departure time of sends; defaults to the loop clock. The cluster points
    /// this at the simulated CPU cursor of the instance being run.
    void set_clock(std::function<TimeNs()> clock) { clock_ = std::move(clock); }
    void set_on_arrival(std::function<void(std::uint16_t)> fn) { on_arrival_ = std::move(fn); }

private:
    friend class SimNetwork;
    SimNetwork& net_;
    NodeId id_;
    InboundQueues inbound_;
    std::function<TimeNs()> clock_;
    std::function<void(std::uint16_t)> on_arrival_;
};

struct SimNetStats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t bytes = 0;
};

/**
 * Seeded datagram network. Same seed and same injections give the same
 * delivery sequence; the running trace hash makes that checkable.
 */
class SimNetwork {
public:
    SimNetwork(EventLoop& loop, SimNetConfig config);

    SimEndpoint& attach(NodeId id, std::size_t instances);
    SimEndpoint& endpoint(NodeId id);
    void set_up(NodeId id, bool up);
    [[nodiscard]] bool up(NodeId id) const;
    void add_partition(PartitionWindow w) { config_.partitions.push_back(std::move(w)); }
    [[nodiscard]] bool connected(NodeId a, NodeId b, TimeNs at) const;

    void set_trace(std::ostream* out) { trace_ = out; }
    [[nodiscard]] std::uint64_t trace_hash() const { return trace_hash_; }
    [[nodiscard]] const SimNetStats& stats() const { return stats_; }
    [[nodiscard]] const SimNetConfig& config() const { return config_; }
    [[nodiscard]] EventLoop& loop() { return loop_; }

private:
    friend class SimEndpoint;
    void transmit(Packet p, TimeNs depart);
    void record(const char* event, const Packet& p, TimeNs at);

    EventLoop& loop_;
    SimNetConfig config_;
    Rng rng_;
    std::map<NodeId, std::unique_ptr<SimEndpoint>> endpoints_;
    std::map<NodeId, bool> up_;
    std::ostream* trace_ = nullptr;
    std::uint64_t trace_hash_ = 0xcbf29ce484222325ULL;
    SimNetStats stats_;
};

// ---------------------------------------------------------------------------
// UDP

/**
 * Real datagram backend. Framing is [u16 header length][header][payload].
 * One socket per node; received datagrams are demultiplexed to per-instance
 * queues by the header's instance id.
 */
class UdpTransport final : public Transport {
public:
    /// Binds host:port (port 0 picks a free port). Throws BindFailed.
    UdpTransport(NodeId self, const std::string& host, std::uint16_t port, std::size_t instances);
    ~UdpTransport() override;
    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    void add_peer(NodeId id, const std::string& host, std::uint16_t port);
    [[nodiscard]] std::uint16_t port() const { return port_; }

    [[nodiscard]] NodeId self() const override { return self_; }
    void send(Packet p) override;
    std::vector<Packet> recv_batch(std::uint16_t instance, std::size_t max = kMaxBatch) override;
    [[nodiscard]] std::size_t queued(std::uint16_t instance) const override;

    /// Reads everything the socket has into the queues; returns datagrams read.
    std::size_t pump();
    /// Blocks up to `timeout` for the socket to become readable.
    bool wait_readable(TimeNs timeout);

private:
    NodeId self_;
    int fd_ = -1;
    std::uint16_t port_ = 0;
    mutable std::mutex mu_;
    std::map<NodeId, std::pair<std::string, std::uint16_t>> peers_;
    InboundQueues inbound_;
};

}  // namespace cyclone
