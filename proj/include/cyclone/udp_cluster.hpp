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

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "cyclone/client.hpp"
#include "cyclone/multilog.hpp"
#include "cyclone/transport.hpp"

namespace cyclone {

/// Monotonic wall clock in nanoseconds since an arbitrary start.
TimeNs wall_now();

struct UdpClusterConfig {
    std::size_t replicas = 3;
    std::uint16_t num_logs = 1;
    bool batching = true;
    std::string host = "127.0.0.1";
    TimeNs election_min = 50 * kMillis;
    TimeNs election_max = 100 * kMillis;
    TimeNs heartbeat = 20 * kMillis;
    std::uint64_t seed = 1;
};

/**
 * Replicas on loopback UDP, one thread per node. Each thread pumps its
 * socket and polls every log of its node in turn.
 */
class UdpCluster {
public:
    explicit UdpCluster(UdpClusterConfig config);
    ~UdpCluster();
    UdpCluster(const UdpCluster&) = delete;
    UdpCluster& operator=(const UdpCluster&) = delete;

    /// Creates a client socket known to every replica. Call before start().
    UdpTransport& add_client_transport(NodeId id);
    [[nodiscard]] std::vector<NodeId> replica_ids() const;

    void start();
    void stop();

    /// Store hashes; only meaningful after stop().
    [[nodiscard]] std::vector<std::uint64_t> state_hashes() const;
    [[nodiscard]] const UdpClusterConfig& config() const { return config_; }

private:
    struct Replica {
        std::unique_ptr<UdpTransport> transport;
        std::unique_ptr<Node> node;
        std::thread thread;
    };
    void run(Replica& r);

    UdpClusterConfig config_;
    std::vector<std::unique_ptr<Replica>> replicas_;
    std::vector<std::unique_ptr<UdpTransport>> clients_;
    std::atomic<bool> running_{false};
};

}  // namespace cyclone
