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

#include "cyclone/multilog.hpp"

#include <algorithm>
#include <limits>

namespace cyclone {

std::uint16_t route(ByteSpan key, std::uint16_t num_logs) {
    if (num_logs == 0) fail(ErrorCode::ContractViolation, "num_logs must be positive");
    return static_cast<std::uint16_t>(fnv1a64(key) % num_logs);
}

std::uint16_t route(std::string_view key, std::uint16_t num_logs) {
    return route(ByteSpan(reinterpret_cast<const std::byte*>(key.data()), key.size()), num_logs);
}

class Node::CountingTransport final : public Transport {
public:
    explicit CountingTransport(Transport& inner) : inner_(inner) {}
    [[nodiscard]] NodeId self() const override { return inner_.self(); }
    void send(Packet p) override {
        ++sent;
        inner_.send(std::move(p));
    }
    std::vector<Packet> recv_batch(std::uint16_t instance, std::size_t max) override {
        return inner_.recv_batch(instance, max);
    }
    [[nodiscard]] std::size_t queued(std::uint16_t instance) const override { return inner_.queued(instance); }
    [[nodiscard]] std::size_t mtu() const override { return inner_.mtu(); }

    std::uint64_t sent = 0;

private:
    Transport& inner_;
};

namespace {

constexpr TimeNs kNever = std::numeric_limits<TimeNs>::max();
constexpr TimeNs kLocalRetry = 20 * kMicros;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t v[2] = {a, b};
    return fnv1a64(ByteSpan(reinterpret_cast<const std::byte*>(v), sizeof v));
}

}  // namespace

Node::Node(NodeConfig config, Transport& transport, std::vector<std::unique_ptr<RaftLog>> logs, TimeNs now)
    : config_(std::move(config)),
      transport_(std::make_unique<CountingTransport>(transport)),
      nonces_(config_.machine_id ? config_.machine_id : config_.id, config_.nonce_clock),
      weak_(config_.num_logs),
      gang_inbox_(config_.num_logs),
      now_(now) {
    if (logs.size() != config_.num_logs) fail(ErrorCode::ContractViolation, "one log per instance required");
    blocked_.assign(config_.num_logs, false);
    hint_sent_.assign(config_.num_logs, false);
    for (std::uint16_t i = 0; i < config_.num_logs; ++i) {
        RaftConfig rc;
        rc.instance = i;
        rc.self = config_.id;
        rc.replicas = config_.replicas;
        rc.election_min = config_.election_min;
        rc.election_max = config_.election_max;
        rc.heartbeat = config_.heartbeat;
        rc.seed = mix(mix(config_.seed, config_.id), i);
        instances_.push_back(std::make_unique<RaftInstance>(std::move(rc), std::move(logs[i]), *transport_, *this, now));
    }
}

Node::~Node() = default;

bool Node::colocated() const {
    return std::all_of(instances_.begin(), instances_.end(), [](const auto& i) { return i->is_leader(); });
}

bool Node::has_input(std::uint16_t log) const {
    return transport_->queued(log) > 0 || !gang_inbox_[log].empty();
}

TimeNs Node::next_deadline(std::uint16_t log) const {
    auto t = instances_[log]->next_timer();
    for (const auto& w : weak_[log]) t = std::min(t, w.deadline);
    if (!gang_inbox_[log].empty()) t = std::min(t, now_ + kLocalRetry);
    if (log == 0 && !gang_queue_.empty() && !gang_in_flight_) t = std::min(t, now_ + kLocalRetry);
    return t;
}

DrainResult Node::drain(std::uint16_t log, std::size_t max_entries) {
    auto& inst = instance(log);
    return inst.log().drain(inst.commit_index(), max_entries);
}

PollStats Node::poll(std::uint16_t log, TimeNs now) {
    now_ = now;
    auto& inst = instance(log);
    PollStats ps;
    auto sent0 = transport_->sent;
    auto pe0 = inst.log().persisted_entries;
    auto pb0 = inst.log().persisted_bytes;
    applied_in_poll_ = 0;

    auto packets = transport_->recv_batch(log, config_.batching ? kMaxBatch : 1);
    ps.received = packets.size();
    std::vector<PayloadHandle> batch;
    for (const auto& p : packets) {
        try {
            auto type = packet_type(p);
            if (type == MsgType::ClientRequest) {
                handle_client(log, p, now, batch);
            } else if (type >= MsgType::AppendEntries && type <= MsgType::CampaignHint && type != MsgType::Redirect) {
                inst.handle(p, now);
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DecodeError) throw;
        }
    }
    propose_batch(log, batch, now, ps);
    if (log == 0) dispatch_gang(now);
    run_gang_inbox(log, now);
    inst.tick(now);
    inst.flush(now);
    if (inst.commit_index() > inst.last_applied()) blocked_[log] = true;
    settle();
    serve_weak(log, now);
    enforce_colocation(log, now);

    ps.sent = transport_->sent - sent0;
    ps.persisted_entries = inst.log().persisted_entries - pe0;
    ps.persisted_bytes = inst.log().persisted_bytes - pb0;
    ps.applied_requests = applied_in_poll_;
    return ps;
}

void Node::handle_client(std::uint16_t log, const Packet& p, TimeNs now, std::vector<PayloadHandle>& batch) {
    if (p.payload.empty()) return;
    auto handle = p.payload.size() == 1 ? p.payload.front() : PayloadHandle::adopt(flatten(p.payload));
    auto req = decode_request(handle.bytes());
    auto& inst = instance(log);
    if (req.log_id != log) {
        respond(log, req, Status::BadRequest);
        return;
    }
    auto not_leader = [&] {
        if (inst.leader() != kNoNode && inst.leader() != config_.id) {
            redirect(log, req, inst.leader());
        } else {
            ++stats_.dropped_requests;
        }
    };
    switch (req.op) {
        case Op::Put:
        case Op::Delete:
        case Op::Get:
            if (!inst.is_leader()) {
                not_leader();
            } else if (inst.transferring(now)) {
                redirect(log, req, inst.transfer_target());
            } else {
                batch.push_back(std::move(handle));
            }
            break;
        case Op::WeakGet:
            if (inst.term() < req.session_term) {
                ++stats_.stale_rejects;
                respond(log, req, Status::StaleLeader);
            } else if (!inst.is_leader()) {
                if (inst.leader() != kNoNode && inst.leader() != config_.id) {
                    redirect(log, req, inst.leader());
                } else {
                    ++stats_.stale_rejects;
                    respond(log, req, Status::StaleLeader);
                }
            } else if (inst.last_applied() >= inst.log().last_index()) {
                auto r = store_.get(to_string(req.key));
                ++stats_.weak_served;
                respond(log, req, r.status, std::move(r.value));
            } else {
                ++stats_.weak_parked;
                weak_[log].push_back({std::move(handle), inst.log().last_index(), now + config_.weak_timeout});
            }
            break;
        case Op::Gang:
        case Op::Snapshot:
            if (log != 0) {
                respond(log, req, Status::BadRequest);
            } else if (!inst.is_leader()) {
                not_leader();
            } else if (!colocated()) {
                ++stats_.not_colocated;
                respond(log, req, Status::NotColocated);
            } else {
                gang_queue_.push_back({std::move(handle), now});
            }
            break;
    }
}

void Node::propose_batch(std::uint16_t log, std::vector<PayloadHandle>& batch, TimeNs now, PollStats& ps) {
    auto& inst = instance(log);
    std::size_t at = 0;
    while (at < batch.size()) {
        std::vector<std::uint32_t> lengths;
        std::size_t bytes = 3;
        auto end = at;
        while (end < batch.size() && lengths.size() < kMaxBatch) {
            auto len = batch[end].size();
            if (!lengths.empty() && bytes + 4 + len > kMaxEntryBytes) break;
            bytes += 4 + len;
            lengths.push_back(static_cast<std::uint32_t>(len));
            ++end;
        }
        PayloadChain body{PayloadHandle::adopt(encode_batch_header(lengths))};
        body.insert(body.end(), batch.begin() + static_cast<long>(at), batch.begin() + static_cast<long>(end));
        auto st = inst.propose(body, now);
        if (st == Status::Ok) {
            ps.proposed_requests += end - at;
        } else if (st == Status::LogFull) {
            for (auto i = at; i < end; ++i) {
                ++stats_.log_full_rejects;
                respond(log, decode_request(batch[i].bytes()), Status::LogFull);
            }
        } else {
            stats_.dropped_requests += end - at;
        }
        at = end;
    }
}

void Node::serve_weak(std::uint16_t log, TimeNs now) {
    auto& inst = instance(log);
    auto& q = weak_[log];
    for (auto it = q.begin(); it != q.end();) {
        auto req = decode_request(it->request.bytes());
        if (!inst.is_leader()) {
            ++stats_.stale_rejects;
            respond(log, req, Status::StaleLeader);
        } else if (inst.last_applied() >= it->wait_index) {
            auto r = store_.get(to_string(req.key));
            ++stats_.weak_served;
            respond(log, req, r.status, std::move(r.value));
        } else if (now >= it->deadline) {
            ++stats_.weak_timeouts;
            respond(log, req, Status::WeakTimeout);
        } else {
            ++it;
            continue;
        }
        it = q.erase(it);
    }
}

void Node::dispatch_gang(TimeNs now) {
    (void)now;
    if (gang_in_flight_ || gang_queue_.empty()) return;
    if (!instance(0).is_leader()) {
        gang_queue_.clear();
        return;
    }
    if (!colocated()) {
        for (const auto& g : gang_queue_) {
            ++stats_.not_colocated;
            respond(0, decode_request(g.request.bytes()), Status::NotColocated);
        }
        gang_queue_.clear();
        return;
    }
    auto pending = std::move(gang_queue_.front());
    gang_queue_.pop_front();
    auto req = decode_request(pending.request.bytes());
    std::vector<std::uint16_t> logs;
    if (req.op == Op::Snapshot) {
        for (std::uint16_t i = 0; i < config_.num_logs; ++i) logs.push_back(i);
    } else {
        logs = req.section_logs();
        logs.push_back(0);  // the coordinator always takes part
        std::sort(logs.begin(), logs.end());
        logs.erase(std::unique(logs.begin(), logs.end()), logs.end());
    }
    if (logs.back() >= config_.num_logs) {
        respond(0, req, Status::BadRequest);
        return;
    }
    GangHeader g;
    g.nonce = nonces_.next();
    for (auto p : logs) g.view.emplace_back(p, instance(p).published_term());
    PayloadChain body{PayloadHandle::adopt(encode_gang_header(g)), pending.request};
    for (std::size_t i = 0; i < logs.size(); ++i) {
        gang_inbox_[logs[i]].push_back({body, g.view[i].second, req.client, req.req_id});
        if (logs[i] != 0 && wake_) wake_(logs[i]);
    }
    gang_in_flight_ = g.nonce;
    ++stats_.gangs_dispatched;
}

void Node::run_gang_inbox(std::uint16_t log, TimeNs now) {
    auto& q = gang_inbox_[log];
    auto& inst = instance(log);
    while (!q.empty()) {
        auto& w = q.front();
        if (!inst.is_leader() || inst.term() != w.view_term) {
            // The stamped view is already stale here; the gang cannot succeed.
            ++stats_.gang_retries_sent;
            respond(0, w.client, Response{w.req_id, Status::GangRetry, inst.term(), 0, {}, 0});
            q.pop_front();
            continue;
        }
        if (inst.propose(w.body, now) == Status::LogFull) break;
        q.pop_front();
    }
}

void Node::enforce_colocation(std::uint16_t log, TimeNs now) {
    if (!config_.colocate || log == 0) return;
    auto& inst = instance(log);
    if (!inst.is_leader()) return;
    auto target = instance(0).leader();
    if (target == kNoNode || target == config_.id) return;
    if (!inst.transferring(now)) {
        // Only start when the target is alive and close to caught up.
        if (inst.match_index(target) < inst.commit_index() || inst.commit_index() == 0) return;
        inst.set_transferring(now + config_.election_max, target);
        hint_sent_[log] = false;
    }
    if (inst.transfer_target() != target || hint_sent_[log] || !inst.fully_replicated_to(target)) return;
    CommonHeader h;
    h.type = MsgType::CampaignHint;
    h.term = inst.term();
    h.instance = log;
    h.src = config_.id;
    Packet p;
    p.dst = target;
    p.header = encode_bare(h);
    transport_->send(std::move(p));
    hint_sent_[log] = true;
    ++stats_.campaign_hints;
}

void Node::settle() {
    auto applied_term = [this](std::uint16_t p) { return instance(p).applied_term(); };
    for (bool progress = true; progress;) {
        progress = false;
        for (auto* s : barriers_.pending()) {
            if (barriers_.try_resolve(*s, applied_term) != GangOutcome::Pending) progress = true;
        }
        for (std::uint16_t p = 0; p < config_.num_logs; ++p) {
            if (!blocked_[p]) continue;
            blocked_[p] = false;
            auto& inst = instance(p);
            if (inst.apply_committed() > 0) {
                progress = true;
                if (wake_) wake_(p);  // parked weak reads may now be servable
            }
            if (inst.last_applied() < inst.commit_index()) blocked_[p] = true;
        }
    }
}

void Node::execute_gang(BarrierTable::Slot& s) {
    std::vector<RequestView::Item> items;
    Op op = Op::Gang;
    for (std::size_t i = 0; i < s.header.view.size(); ++i) {
        auto e = decode_entry(s.bodies[i].bytes());
        auto req = decode_request(e.gang_request);
        op = req.op;
        auto mine = req.items_for(s.header.view[i].first);
        items.insert(items.end(), mine.begin(), mine.end());
    }
    store_.apply_items(items);
    if (op == Op::Snapshot) s.snapshot_id = store_.snapshot();
    s.executed = true;
    applied_in_poll_ += items.size();
    ++stats_.gangs_succeeded;
}

ApplyResult Node::apply(RaftInstance& inst, std::uint64_t index, std::uint64_t term, const PayloadHandle& body) {
    (void)index;
    (void)term;
    auto log = inst.instance();
    auto e = decode_entry(body.bytes());
    if (e.kind == EntryKind::Noop) return ApplyResult::Done;
    if (e.kind == EntryKind::Batch) {
        for (auto r : e.requests) {
            auto req = decode_request(r);
            auto res = store_.apply(req);
            ++applied_in_poll_;
            if (inst.is_leader()) respond(log, req, res.status, std::move(res.value));
        }
        return ApplyResult::Done;
    }

    auto& slot = barriers_.arrive(log, e.gang, body);
    auto outcome = barriers_.try_resolve(slot, [this](std::uint16_t p) { return instance(p).applied_term(); });
    if (outcome == GangOutcome::Pending) {
        blocked_[log] = true;
        return ApplyResult::Blocked;
    }
    if (outcome == GangOutcome::Success && !slot.executed) execute_gang(slot);
    if (outcome == GangOutcome::Failed && !slot.executed) {
        slot.executed = true;
        ++stats_.gangs_failed;
    }
    auto req = decode_request(e.gang_request);
    if (inst.is_leader()) {
        if (outcome == GangOutcome::Success && log == 0) {
            Response r{req.req_id, Status::Ok, inst.term(), 0, {}, slot.snapshot_id};
            respond(0, req.client, r);
        } else if (outcome == GangOutcome::Failed) {
            ++stats_.gang_retries_sent;
            respond(0, req.client, Response{req.req_id, Status::GangRetry, inst.term(), 0, {}, 0});
        }
    }
    if (gang_observer_) gang_observer_({config_.id, log, e.gang.nonce, outcome, e.gang.view.size(), req.client, req.req_id});
    auto nonce = e.gang.nonce;
    if (log == 0 && gang_in_flight_ && *gang_in_flight_ == nonce) {
        gang_in_flight_.reset();
        if (!gang_queue_.empty() && wake_) wake_(0);
    }
    barriers_.consume(nonce, log);
    return ApplyResult::Done;
}

void Node::on_role_change(RaftInstance& inst) {
    if (inst.instance() == 0 && !inst.is_leader()) {
        gang_queue_.clear();
        gang_in_flight_.reset();
    }
}

void Node::respond(std::uint16_t log, NodeId client, const Response& r) {
    CommonHeader h;
    h.type = MsgType::ClientResponse;
    h.term = r.term;
    h.instance = log;
    h.src = config_.id;
    Packet p;
    p.dst = client;
    p.header = encode_response(h, r);
    transport_->send(std::move(p));
}

void Node::respond(std::uint16_t log, const RequestView& req, Status status, std::string value) {
    Response r{req.req_id, status, instance(log).term(), log, std::move(value), 0};
    respond(log, req.client, r);
}

void Node::redirect(std::uint16_t log, const RequestView& req, NodeId leader) {
    ++stats_.redirects;
    CommonHeader h;
    h.type = MsgType::Redirect;
    h.term = instance(log).term();
    h.instance = log;
    h.src = config_.id;
    Packet p;
    p.dst = req.client;
    p.header = encode(h, RedirectMsg{req.req_id, leader});
    transport_->send(std::move(p));
}

}  // namespace cyclone
