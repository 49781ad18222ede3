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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cyclone/transport.hpp"
#include "cyclone/wire.hpp"

namespace cyclone {

struct ClientConfig {
    NodeId id = 1000;
    std::vector<NodeId> replicas;
    std::uint16_t num_logs = 1;
    TimeNs timeout = 30 * kMillis;
    TimeNs retry_backoff = 60 * kMillis;  // after a retryable status
    TimeNs probe_delay = 5 * kMillis;     // before re-probing after a redirect loop
    TimeNs suspect_for = 500 * kMillis;
    std::uint32_t max_attempts = 200;
};

struct ClientResult {
    Status status = Status::Ok;
    std::string value;
    std::uint64_t term = 0;
    std::uint64_t snapshot_id = 0;
    std::uint32_t attempts = 0;
    NodeId served_by = kNoNode;
    TimeNs start = 0;
    TimeNs end = 0;
};

struct ClientStats {
    std::uint64_t sent = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t redirects = 0;
    std::uint64_t retries = 0;
    std::uint64_t stale_rejected = 0;
    std::uint64_t gang_retries = 0;
    std::uint64_t completed = 0;
};

/**
 * Event-driven client with one outstanding operation. The owner delivers
 * packets with on_packet() and calls tick() at next_deadline().
 *
 * req_id = (op number << 8) | attempt, so a late answer to an earlier attempt
 * of the current operation still completes it.
 */
class Client {
public:
    using Callback = std::function<void(const ClientResult&)>;

    Client(ClientConfig config, Transport& transport);

    void get(const std::string& key, TimeNs now, Callback cb);
    void weak_get(const std::string& key, TimeNs now, Callback cb);
    void put(const std::string& key, const std::string& value, TimeNs now, Callback cb);
    void del(const std::string& key, TimeNs now, Callback cb);
    /// Atomic write batch; items are grouped by their route.
    void gang(const std::vector<GangItem>& items, TimeNs now, Callback cb);
    void snapshot(TimeNs now, Callback cb);

    void on_packet(const Packet& p, TimeNs now);
    void tick(TimeNs now);
    [[nodiscard]] TimeNs next_deadline() const;
    [[nodiscard]] bool busy() const { return active_.has_value(); }

    [[nodiscard]] std::uint64_t session_term(std::uint16_t log) const;
    [[nodiscard]] NodeId cached_leader(std::uint16_t log) const;
    [[nodiscard]] const ClientStats& stats() const { return stats_; }
    /// Op id the next started operation will carry (the high bits of its req_id).
    [[nodiscard]] std::uint64_t next_op_id() const { return next_op_; }
    [[nodiscard]] NodeId id() const { return config_.id; }
    [[nodiscard]] const ClientConfig& config() const { return config_; }

private:
    struct Active {
        Request req;
        Callback cb;
        std::uint64_t op_id = 0;
        std::uint32_t attempts = 0;
        NodeId target = kNoNode;
        TimeNs start = 0;
        TimeNs deadline = 0;   // timeout of the attempt in flight
        TimeNs resend_at = 0;  // nonzero while waiting to resend
        std::uint32_t hops = 0;
    };

    void start(Request req, TimeNs now, Callback cb);
    void send_attempt(TimeNs now);
    void schedule_resend(NodeId target, TimeNs at);
    void finish(ClientResult r, TimeNs now);
    NodeId next_replica(NodeId after) const;
    bool suspect(NodeId n, TimeNs now) const;

    ClientConfig config_;
    Transport& transport_;
    std::optional<Active> active_;
    std::uint64_t next_op_ = 1;
    std::map<std::uint16_t, std::uint64_t> session_;
    std::map<std::uint16_t, NodeId> leaders_;
    std::map<NodeId, TimeNs> suspects_;
    ClientStats stats_;
};

}  // namespace cyclone
