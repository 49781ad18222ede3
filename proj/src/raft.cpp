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

#include "cyclone/raft.hpp"

#include <algorithm>

namespace cyclone {

// ---------------------------------------------------------------------------
// RaftLog

RaftLog::RaftLog(std::unique_ptr<NvmRegion> nvm, std::unique_ptr<Flashlog> flash)
    : nvm_(std::move(nvm)), flash_(std::move(flash)) {
    const auto& recovered = flash_->recovered();
    auto merged = merge_recover(*nvm_, recovered);
    terms_.reserve(merged.size());
    for (const auto& e : merged) {
        if (e.index != terms_.size() + 1 || e.lsn != e.index - 1) {
            fail(ErrorCode::RecoverInvariantViolation,
                 "log index " + std::to_string(e.index) + " at lsn " + std::to_string(e.lsn) + " is out of sequence");
        }
        terms_.push_back(e.term);
    }
    if (!recovered.empty()) {
        recovered_flash_index_ = recovered.back().index;
        if (nvm_->empty()) nvm_->reset_next_lsn(recovered.back().lsn + 1);
    }
}

std::uint64_t RaftLog::term_at(std::uint64_t index) const {
    if (index == 0) return 0;
    if (index > terms_.size()) fail(ErrorCode::ContractViolation, "term_at past the end of the log");
    return terms_[index - 1];
}

PayloadHandle RaftLog::payload(std::uint64_t index) const {
    if (index == 0 || index > terms_.size()) fail(ErrorCode::ContractViolation, "payload outside the log");
    auto lsn = index - 1;
    if (nvm_->contains(lsn)) return nvm_->entry(lsn).payload;
    auto e = flash_->read(lsn);
    if (!e) fail(ErrorCode::ContractViolation, "entry " + std::to_string(index) + " is in neither log level");
    return e->payload;
}

std::uint64_t RaftLog::append(std::uint64_t term, const PayloadChain& body) {
    auto index = terms_.size() + 1;
    auto lsn = nvm_->append(term, index, body);
    if (lsn != index - 1) fail(ErrorCode::ContractViolation, "lsn and index diverged");
    terms_.push_back(term);
    ++persisted_entries;
    persisted_bytes += chain_size(body);
    return index;
}

void RaftLog::truncate_from(std::uint64_t from) {
    if (from == 0 || from > terms_.size()) return;
    nvm_->truncate_back(from);
    terms_.resize(from - 1);
}

DrainResult RaftLog::drain(std::uint64_t commit_index, std::size_t max_entries) {
    return drain_step(*nvm_, *flash_, commit_index == 0 ? kNoLsn : commit_index - 1, max_entries);
}

// ---------------------------------------------------------------------------
// RaftInstance

const char* to_string(Role r) {
    switch (r) {
        case Role::Follower: return "follower";
        case Role::Candidate: return "candidate";
        case Role::Leader: return "leader";
    }
    return "?";
}

RaftInstance::RaftInstance(RaftConfig config, std::unique_ptr<RaftLog> log, Transport& transport, RaftHost& host,
                           TimeNs now)
    : config_(std::move(config)), log_(std::move(log)), transport_(transport), host_(host), rng_(config_.seed) {
    auto meta = log_->nvm().load_meta();
    term_ = meta.term;
    voted_for_ = meta.voted_for;
    published_term_.store(term_, std::memory_order_release);
    // Everything in the flashlog was committed before it was drained.
    commit_ = log_->recovered_flash_index();
    reset_election(now);
}

CommonHeader RaftInstance::header(MsgType type) const {
    CommonHeader h;
    h.type = type;
    h.term = term_;
    h.instance = config_.instance;
    h.src = config_.self;
    return h;
}

void RaftInstance::set_term(std::uint64_t term, std::optional<NodeId> vote) {
    if (term == term_ && vote == voted_for_) return;
    log_->nvm().store_meta({term, vote});
    term_ = term;
    voted_for_ = vote;
    published_term_.store(term, std::memory_order_release);
}

void RaftInstance::reset_election(TimeNs now) {
    election_due_ = now + rng_.between(config_.election_min, config_.election_max);
}

void RaftInstance::become_follower(std::uint64_t term, NodeId leader, TimeNs now) {
    auto changed = role_ != Role::Follower || leader != leader_ || term != term_;
    if (term > term_) set_term(term, std::nullopt);
    role_ = Role::Follower;
    leader_ = leader;
    votes_.clear();
    transfer_until_ = 0;
    reset_election(now);
    if (changed) host_.on_role_change(*this);
}

void RaftInstance::campaign(TimeNs now) {
    if (role_ == Role::Leader) return;
    role_ = Role::Candidate;
    leader_ = kNoNode;
    set_term(term_ + 1, config_.self);
    ++stats_.elections;
    votes_.assign(1, config_.self);
    reset_election(now);
    host_.on_role_change(*this);
    if (votes_.size() >= quorum()) {
        become_leader(now);
        return;
    }
    RequestVoteMsg m{log_->last_index(), log_->last_term()};
    for (auto r : config_.replicas) {
        if (r == config_.self) continue;
        Packet p;
        p.dst = r;
        p.header = encode(header(MsgType::RequestVote), m);
        transport_.send(std::move(p));
    }
}

void RaftInstance::become_leader(TimeNs now) {
    role_ = Role::Leader;
    leader_ = config_.self;
    ++stats_.terms_led;
    peers_.clear();
    for (auto r : config_.replicas) {
        if (r != config_.self) peers_[r] = Peer{log_->last_index() + 1, 0};
    }
    host_.on_role_change(*this);
    Bytes noop{static_cast<std::byte>(EntryKind::Noop)};
    PayloadChain body{PayloadHandle::adopt(std::move(noop))};
    if (propose(body, now) != Status::Ok) {
        // Ring full: heartbeats carry on and the noop is retried on the next tick.
        broadcast_heartbeat(now);
    }
    heartbeat_due_ = now + config_.heartbeat;
}

void RaftInstance::send_append(NodeId peer, std::uint64_t from) {
    auto last = log_->last_index();
    from = std::clamp<std::uint64_t>(from, 1, last + 1);
    AppendEntriesMsg m;
    m.prev_index = from - 1;
    m.prev_term = log_->term_at(m.prev_index);
    m.commit_index = commit_;
    PayloadChain payload;
    auto budget = transport_.mtu() - kCommonHeaderSize - kAppendEntriesFixed;
    for (auto i = from; i <= last; ++i) {
        auto body = log_->payload(i);
        auto need = kEntryDescSize + body.size();
        if (need > budget) break;
        budget -= need;
        if (!log_->nvm().contains(i - 1) && !log_->flash().readable(i - 1)) ++stats_.sent_unpersisted;
        m.entries.push_back({log_->term_at(i), i, static_cast<std::uint32_t>(body.size())});
        payload.push_back(std::move(body));
        if (m.entries.size() >= kMaxBatch * 4) break;
    }
    auto& st = peers_[peer];
    if (!m.entries.empty()) st.next = from + m.entries.size();
    ++stats_.append_entries_sent;
    stats_.entries_sent += m.entries.size();
    Packet p;
    p.dst = peer;
    p.header = encode(header(MsgType::AppendEntries), m);
    p.payload = std::move(payload);
    transport_.send(std::move(p));
}

void RaftInstance::broadcast_heartbeat(TimeNs now) {
    for (auto& [id, st] : peers_) send_append(id, st.match + 1);
    heartbeat_due_ = now + config_.heartbeat;
}

Status RaftInstance::propose(const PayloadChain& body, TimeNs now) {
    (void)now;
    if (role_ != Role::Leader) return Status::Unavailable;
    std::uint64_t index = 0;
    try {
        index = log_->append(term_, body);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::LogFull) throw;
        ++stats_.log_full;
        return Status::LogFull;
    }
    ++stats_.entries_appended;
    // Followers whose pipeline is caught up share one payload chain.
    std::vector<NodeId> caught_up;
    for (auto& [id, st] : peers_) {
        if (st.next == index) caught_up.push_back(id);
    }
    if (!caught_up.empty()) {
        AppendEntriesMsg m;
        m.prev_index = index - 1;
        m.prev_term = log_->term_at(index - 1);
        m.commit_index = commit_;
        auto payload = log_->payload(index);
        m.entries.push_back({term_, index, static_cast<std::uint32_t>(payload.size())});
        auto hdr = encode(header(MsgType::AppendEntries), m);
        PayloadChain chain{payload};
        transport_.send_multicast(chain, caught_up, [&](NodeId) { return hdr; });
        for (auto id : caught_up) peers_[id].next = index + 1;
        stats_.append_entries_sent += caught_up.size();
        stats_.entries_sent += caught_up.size();
    }
    advance_commit();
    return Status::Ok;
}

void RaftInstance::advance_commit() {
    if (role_ != Role::Leader) return;
    std::vector<std::uint64_t> matches{log_->last_index()};
    for (const auto& [id, st] : peers_) matches.push_back(st.match);
    auto q = quorum();
    std::nth_element(matches.begin(), matches.begin() + static_cast<long>(q - 1), matches.end(),
                     std::greater<>());
    auto n = matches[q - 1];
    if (n > commit_ && log_->term_at(n) == term_) commit_ = n;
}

void RaftInstance::handle(const Packet& p, TimeNs now) {
    ByteReader r(p.header);
    auto h = decode_common(r);
    if (h.instance != config_.instance) return;
    if (std::find(config_.replicas.begin(), config_.replicas.end(), h.src) == config_.replicas.end()) return;
    switch (h.type) {
        case MsgType::AppendEntries: on_append_entries(h, r, p, now); break;
        case MsgType::AppendResponse: on_append_response(h, r, now); break;
        case MsgType::RequestVote: on_request_vote(h, r, now); break;
        case MsgType::VoteResponse: on_vote_response(h, r, now); break;
        case MsgType::CampaignHint:
            if (h.term == term_ && role_ == Role::Follower) campaign(now);
            break;
        default: break;
    }
}

void RaftInstance::reply_append(NodeId to, bool success, std::uint64_t match) {
    Packet p;
    p.dst = to;
    p.header = encode(header(MsgType::AppendResponse), AppendResponseMsg{success, match});
    if (success) {
        ++stats_.acks_sent;
    } else {
        ++stats_.nacks_sent;
    }
    transport_.send(std::move(p));
}

void RaftInstance::on_append_entries(const CommonHeader& h, ByteReader& r, const Packet& p, TimeNs now) {
    auto m = decode_append_entries(r);
    if (h.term < term_) {
        reply_append(h.src, false, log_->last_index() + 1);
        return;
    }
    if (h.term > term_ || role_ != Role::Follower || leader_ != h.src) {
        become_follower(h.term, h.src, now);
    } else {
        reset_election(now);
    }

    if (m.prev_index > log_->last_index()) {
        reply_append(h.src, false, log_->last_index() + 1);
        return;
    }
    if (log_->term_at(m.prev_index) != m.prev_term) {
        // Everything up to our commit index matches the leader.
        reply_append(h.src, false, std::min(m.prev_index, commit_ + 1));
        return;
    }

    std::vector<std::uint32_t> lengths;
    lengths.reserve(m.entries.size());
    for (const auto& e : m.entries) lengths.push_back(e.length);
    auto bodies = split_chain(p.payload, lengths);

    auto matched = m.prev_index;
    bool full = false;
    for (std::size_t k = 0; k < m.entries.size(); ++k) {
        const auto& e = m.entries[k];
        if (e.index != m.prev_index + 1 + k) fail(ErrorCode::DecodeError, "entry indexes are not consecutive");
        if (e.index <= log_->last_index()) {
            if (log_->term_at(e.index) == e.term) {
                matched = e.index;
                continue;
            }
            if (e.index <= commit_) fail(ErrorCode::ContractViolation, "leader conflicts with a committed entry");
            log_->truncate_from(e.index);
        }
        try {
            log_->append(e.term, bodies[k]);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::LogFull) throw;
            ++stats_.log_full;
            full = true;
            break;
        }
        matched = e.index;
    }

    auto new_commit = std::min(m.commit_index, matched);
    if (new_commit > commit_) commit_ = new_commit;

    if (full) {
        reply_append(h.src, false, matched + 1);
        return;
    }
    if (matched > 0 && !log_->nvm().contains(matched - 1) && !log_->flash().readable(matched - 1)) {
        ++stats_.acked_unpersisted;
    }
    // One ack per leader per poll, carrying the highest match.
    if (pending_ack_ && pending_ack_->first != h.src) {
        reply_append(pending_ack_->first, true, pending_ack_->second);
        pending_ack_.reset();
    }
    if (!pending_ack_ || pending_ack_->second < matched) pending_ack_ = {h.src, matched};
}

void RaftInstance::on_append_response(const CommonHeader& h, ByteReader& r, TimeNs now) {
    auto m = decode_append_response(r);
    if (h.term > term_) {
        become_follower(h.term, kNoNode, now);
        return;
    }
    if (role_ != Role::Leader || h.term < term_) return;  // stale
    auto it = peers_.find(h.src);
    if (it == peers_.end()) return;
    auto& st = it->second;
    auto last = log_->last_index();
    if (m.success) {
        if (m.match_index > last) return;
        if (m.match_index > st.match) st.match = m.match_index;
        st.next = std::max(st.next, st.match + 1);
        advance_commit();
        if (st.next == st.match + 1 && st.next <= last) send_append(h.src, st.next);
    } else {
        st.next = std::clamp<std::uint64_t>(m.match_index, st.match + 1, last + 1);
        send_append(h.src, st.next);
    }
}

void RaftInstance::on_request_vote(const CommonHeader& h, ByteReader& r, TimeNs now) {
    auto m = decode_request_vote(r);
    if (h.term > term_) become_follower(h.term, kNoNode, now);
    bool up_to_date = m.last_term > log_->last_term() ||
                      (m.last_term == log_->last_term() && m.last_index >= log_->last_index());
    bool grant = h.term == term_ && role_ == Role::Follower && (!voted_for_ || *voted_for_ == h.src) && up_to_date;
    if (grant) {
        set_term(term_, h.src);
        reset_election(now);
    }
    Packet p;
    p.dst = h.src;
    p.header = encode(header(MsgType::VoteResponse), VoteResponseMsg{grant});
    transport_.send(std::move(p));
}

void RaftInstance::on_vote_response(const CommonHeader& h, ByteReader& r, TimeNs now) {
    auto m = decode_vote_response(r);
    if (h.term > term_) {
        become_follower(h.term, kNoNode, now);
        return;
    }
    if (role_ != Role::Candidate || h.term != term_ || !m.granted) return;
    if (std::find(votes_.begin(), votes_.end(), h.src) != votes_.end()) return;
    votes_.push_back(h.src);
    if (votes_.size() >= quorum()) become_leader(now);
}

void RaftInstance::tick(TimeNs now) {
    if (role_ == Role::Leader) {
        if (now >= heartbeat_due_) {
            if (log_->last_index() == 0 || log_->term_at(log_->last_index()) != term_) {
                Bytes noop{static_cast<std::byte>(EntryKind::Noop)};
                propose(PayloadChain{PayloadHandle::adopt(std::move(noop))}, now);
            }
            broadcast_heartbeat(now);
        }
    } else if (now >= election_due_) {
        campaign(now);
    }
}

TimeNs RaftInstance::next_timer() const { return role_ == Role::Leader ? heartbeat_due_ : election_due_; }

void RaftInstance::flush(TimeNs now) {
    (void)now;
    if (pending_ack_) {
        reply_append(pending_ack_->first, true, pending_ack_->second);
        pending_ack_.reset();
    }
    apply_committed();
}

std::uint64_t RaftInstance::apply_committed() {
    std::uint64_t n = 0;
    while (applied_ < commit_) {
        auto index = applied_ + 1;
        auto term = log_->term_at(index);
        if (host_.apply(*this, index, term, log_->payload(index)) == ApplyResult::Blocked) break;
        applied_ = index;
        applied_term_ = term;
        ++n;
    }
    return n;
}

std::uint64_t RaftInstance::match_index(NodeId peer) const {
    if (peer == config_.self) return log_->last_index();
    auto it = peers_.find(peer);
    return it == peers_.end() ? 0 : it->second.match;
}

bool RaftInstance::fully_replicated_to(NodeId peer) const {
    return role_ == Role::Leader && match_index(peer) == log_->last_index() && commit_ == log_->last_index();
}

void RaftInstance::set_transferring(TimeNs until, NodeId target) {
    transfer_until_ = until;
    transfer_target_ = target;
}

}  // namespace cyclone
