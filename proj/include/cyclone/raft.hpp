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
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "cyclone/flashlog.hpp"
#include "cyclone/nvm_log.hpp"
#include "cyclone/sim.hpp"
#include "cyclone/transport.hpp"

namespace cyclone {

/**
 * The two-level log of one RAFT instance. RAFT index i lives at LSN i - 1.
 * Recent entries sit in the NVM ring; older committed ones only in the
 * flashlog.
 */
class RaftLog {
public:
    RaftLog(std::unique_ptr<NvmRegion> nvm, std::unique_ptr<Flashlog> flash);

    [[nodiscard]] std::uint64_t last_index() const { return terms_.size(); }
    [[nodiscard]] std::uint64_t last_term() const { return terms_.empty() ? 0 : terms_.back(); }
    /// 0 for index 0; throws ContractViolation past the end.
    [[nodiscard]] std::uint64_t term_at(std::uint64_t index) const;
    [[nodiscard]] PayloadHandle payload(std::uint64_t index) const;

    /// Persists the entry; throws Error(LogFull) when the ring or arena is full.
    std::uint64_t append(std::uint64_t term, const PayloadChain& body);
    /// Removes every entry with index >= from.
    void truncate_from(std::uint64_t from);

    /// Highest index present in the flashlog when the log was opened.
    [[nodiscard]] std::uint64_t recovered_flash_index() const { return recovered_flash_index_; }
    /// One drain pass for entries up to `commit_index`.
    DrainResult drain(std::uint64_t commit_index, std::size_t max_entries = 64);

    NvmRegion& nvm() { return *nvm_; }
    Flashlog& flash() { return *flash_; }
    [[nodiscard]] const Flashlog& flash() const { return *flash_; }

    // Persistence work done by append(), for the simulator's cost model.
    std::uint64_t persisted_entries = 0;
    std::uint64_t persisted_bytes = 0;
    [[nodiscard]] const NvmRegion& nvm() const { return *nvm_; }

private:
    std::unique_ptr<NvmRegion> nvm_;
    std::unique_ptr<Flashlog> flash_;
    std::vector<std::uint64_t> terms_;
    std::uint64_t recovered_flash_index_ = 0;
};

enum class Role : std::uint8_t { Follower, Candidate, Leader };
const char* to_string(Role r);

struct RaftConfig {
    std::uint16_t instance = 0;
    NodeId self = 0;
    std::vector<NodeId> replicas;  // including self
    TimeNs election_min = 150 * kMillis;
    TimeNs election_max = 300 * kMillis;
    TimeNs heartbeat = 50 * kMillis;
    std::uint64_t seed = 1;
};

enum class ApplyResult { Done, Blocked };

class RaftInstance;

/// Callbacks into the owner of an instance.
class RaftHost {
public:
    virtual ~RaftHost() = default;
    virtual ApplyResult apply(RaftInstance& inst, std::uint64_t index, std::uint64_t term,
                              const PayloadHandle& body) = 0;
    virtual void on_role_change(RaftInstance&) {}
};

struct RaftStats {
    std::uint64_t entries_appended = 0;
    std::uint64_t append_entries_sent = 0;
    std::uint64_t entries_sent = 0;
    std::uint64_t acks_sent = 0;
    std::uint64_t nacks_sent = 0;
    std::uint64_t elections = 0;
    std::uint64_t terms_led = 0;
    std::uint64_t log_full = 0;
    // Durability ordering checks; both stay zero.
    std::uint64_t sent_unpersisted = 0;
    std::uint64_t acked_unpersisted = 0;
};

/**
 * One RAFT instance as a set of event handlers. The owner feeds it packets,
 * proposals and clock ticks and calls flush() once per poll; the instance
 * sends through the owner's transport.
 */
class RaftInstance {
public:
    RaftInstance(RaftConfig config, std::unique_ptr<RaftLog> log, Transport& transport, RaftHost& host,
                 TimeNs now);

    /// AppendEntries, AppendResponse, RequestVote, VoteResponse or CampaignHint.
    void handle(const Packet& p, TimeNs now);
    /// Appends one entry and multicasts it. Ok, Unavailable (not leader) or LogFull.
    Status propose(const PayloadChain& body, TimeNs now);
    /// Election and heartbeat timers.
    void tick(TimeNs now);
    [[nodiscard]] TimeNs next_timer() const;
    /// Sends the coalesced ack for this poll and applies committed entries.
    void flush(TimeNs now);
    /// Applies committed entries until done or the host blocks.
    std::uint64_t apply_committed();
    /// Starts an election now (co-location hint or tests).
    void campaign(TimeNs now);

    /// True when every replica has matched the whole log and it is committed.
    [[nodiscard]] bool fully_replicated_to(NodeId peer) const;
    /// Leader only: suspends proposals until `until`.
    void set_transferring(TimeNs until, NodeId target);
    [[nodiscard]] bool transferring(TimeNs now) const { return now < transfer_until_; }
    [[nodiscard]] NodeId transfer_target() const { return transfer_target_; }

    [[nodiscard]] Role role() const { return role_; }
    [[nodiscard]] bool is_leader() const { return role_ == Role::Leader; }
    [[nodiscard]] std::uint64_t term() const { return term_; }
    [[nodiscard]] std::uint64_t published_term() const { return published_term_.load(std::memory_order_acquire); }
    [[nodiscard]] NodeId leader() const { return leader_; }
    [[nodiscard]] NodeId self() const { return config_.self; }
    [[nodiscard]] std::uint16_t instance() const { return config_.instance; }
    [[nodiscard]] std::uint64_t commit_index() const { return commit_; }
    [[nodiscard]] std::uint64_t last_applied() const { return applied_; }
    [[nodiscard]] std::uint64_t applied_term() const { return applied_term_; }
    [[nodiscard]] std::uint64_t match_index(NodeId peer) const;
    [[nodiscard]] const RaftConfig& config() const { return config_; }
    [[nodiscard]] const RaftStats& stats() const { return stats_; }
    RaftLog& log() { return *log_; }
    [[nodiscard]] const RaftLog& log() const { return *log_; }

private:
    struct Peer {
        std::uint64_t next = 1;
        std::uint64_t match = 0;
    };

    [[nodiscard]] std::size_t quorum() const { return config_.replicas.size() / 2 + 1; }
    CommonHeader header(MsgType type) const;
    void set_term(std::uint64_t term, std::optional<NodeId> vote);
    void become_follower(std::uint64_t term, NodeId leader, TimeNs now);
    void become_leader(TimeNs now);
    void reset_election(TimeNs now);
    /// Sends entries [from, ...] to `peer`, as many as fit in one datagram.
    void send_append(NodeId peer, std::uint64_t from);
    void broadcast_heartbeat(TimeNs now);
    void advance_commit();

    void on_append_entries(const CommonHeader& h, ByteReader& r, const Packet& p, TimeNs now);
    void on_append_response(const CommonHeader& h, ByteReader& r, TimeNs now);
    void on_request_vote(const CommonHeader& h, ByteReader& r, TimeNs now);
    void on_vote_response(const CommonHeader& h, ByteReader& r, TimeNs now);
    void reply_append(NodeId to, bool success, std::uint64_t match);

    RaftConfig config_;
    std::unique_ptr<RaftLog> log_;
    Transport& transport_;
    RaftHost& host_;
    Rng rng_;

    Role role_ = Role::Follower;
    std::uint64_t term_ = 0;
    std::optional<NodeId> voted_for_;
    std::atomic<std::uint64_t> published_term_{0};
    NodeId leader_ = kNoNode;
    std::uint64_t commit_ = 0;
    std::uint64_t applied_ = 0;
    std::uint64_t applied_term_ = 0;
    std::map<NodeId, Peer> peers_;
    std::vector<NodeId> votes_;
    TimeNs election_due_ = 0;
    TimeNs heartbeat_due_ = 0;
    TimeNs transfer_until_ = 0;
    NodeId transfer_target_ = kNoNode;
    // Coalesced success ack, sent by flush().
    std::optional<std::pair<NodeId, std::uint64_t>> pending_ack_;
    RaftStats stats_;
};

}  // namespace cyclone
