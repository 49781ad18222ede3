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

#include "cyclone/client.hpp"

#include <algorithm>
#include <limits>

#include "cyclone/multilog.hpp"

namespace cyclone {

namespace {

constexpr std::uint32_t kMaxImmediateHops = 3;

}  // namespace

Client::Client(ClientConfig config, Transport& transport) : config_(std::move(config)), transport_(transport) {
    if (config_.replicas.empty()) fail(ErrorCode::ContractViolation, "client needs at least one replica");
    if (config_.timeout == 0) fail(ErrorCode::ContractViolation, "client timeout must be positive");
}

void Client::get(const std::string& key, TimeNs now, Callback cb) {
    Request r;
    r.op = Op::Get;
    r.key = key;
    start(std::move(r), now, std::move(cb));
}

void Client::weak_get(const std::string& key, TimeNs now, Callback cb) {
    Request r;
    r.op = Op::WeakGet;
    r.key = key;
    start(std::move(r), now, std::move(cb));
}

void Client::put(const std::string& key, const std::string& value, TimeNs now, Callback cb) {
    Request r;
    r.op = Op::Put;
    r.key = key;
    r.value = value;
    start(std::move(r), now, std::move(cb));
}

void Client::del(const std::string& key, TimeNs now, Callback cb) {
    Request r;
    r.op = Op::Delete;
    r.key = key;
    start(std::move(r), now, std::move(cb));
}

void Client::gang(const std::vector<GangItem>& items, TimeNs now, Callback cb) {
    Request r;
    r.op = Op::Gang;
    std::map<std::uint16_t, std::vector<GangItem>> by_log;
    for (const auto& it : items) by_log[route(it.key, config_.num_logs)].push_back(it);
    for (auto& [log, v] : by_log) r.sections.emplace_back(log, std::move(v));
    start(std::move(r), now, std::move(cb));
}

void Client::snapshot(TimeNs now, Callback cb) {
    Request r;
    r.op = Op::Snapshot;
    start(std::move(r), now, std::move(cb));
}

void Client::start(Request req, TimeNs now, Callback cb) {
    if (active_) fail(ErrorCode::ContractViolation, "client already has an operation outstanding");
    req.client = config_.id;
    if (req.op == Op::Gang || req.op == Op::Snapshot) {
        req.log_id = 0;
    } else {
        req.log_id = route(req.key, config_.num_logs);
    }
    Active a;
    a.op_id = next_op_++;
    a.start = now;
    a.cb = std::move(cb);
    if (encode_request(req).size() > kMaxRequestBytes) {
        ClientResult r;
        r.status = Status::TooLarge;
        r.start = r.end = now;
        a.cb(r);
        return;
    }
    auto cached = leaders_.find(req.log_id);
    if (cached != leaders_.end() && !suspect(cached->second, now)) {
        a.target = cached->second;
    } else {
        a.target = next_replica(kNoNode);
    }
    a.req = std::move(req);
    active_ = std::move(a);
    send_attempt(now);
}

void Client::send_attempt(TimeNs now) {
    auto& a = *active_;
    if (a.attempts >= config_.max_attempts) {
        ClientResult r;
        r.status = Status::Unavailable;
        finish(std::move(r), now);
        return;
    }
    ++a.attempts;
    a.req.req_id = (a.op_id << 8) | (a.attempts & 0xFF);
    a.req.session_term = session_term(a.req.log_id);
    CommonHeader h;
    h.type = MsgType::ClientRequest;
    h.instance = a.req.log_id;
    h.src = config_.id;
    Packet p;
    p.dst = a.target;
    p.header = encode_bare(h);
    p.payload.push_back(PayloadHandle::adopt(encode_request(a.req)));
    a.deadline = now + config_.timeout;
    a.resend_at = 0;
    ++stats_.sent;
    transport_.send(std::move(p));
}

void Client::schedule_resend(NodeId target, TimeNs at) {
    auto& a = *active_;
    a.target = target;
    a.resend_at = at;
    a.deadline = 0;
}

void Client::finish(ClientResult r, TimeNs now) {
    auto a = std::move(*active_);
    active_.reset();
    r.attempts = a.attempts;
    r.start = a.start;
    r.end = now;
    ++stats_.completed;
    a.cb(r);
}

NodeId Client::next_replica(NodeId after) const {
    const auto& rs = config_.replicas;
    auto it = std::find(rs.begin(), rs.end(), after);
    std::size_t start = it == rs.end() ? 0 : static_cast<std::size_t>(it - rs.begin()) + 1;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        auto n = rs[(start + k) % rs.size()];
        if (n == after) continue;
        auto s = suspects_.find(n);
        if (s == suspects_.end()) return n;
    }
    return rs[start % rs.size()];
}

bool Client::suspect(NodeId n, TimeNs now) const {
    auto it = suspects_.find(n);
    return it != suspects_.end() && now < it->second;
}

void Client::on_packet(const Packet& p, TimeNs now) {
    ByteReader r(p.header);
    CommonHeader h;
    try {
        h = decode_common(r);
    } catch (const Error&) {
        return;
    }
    if (h.type == MsgType::ClientResponse) {
        auto resp = decode_response(h, r);
        if (!active_ || (resp.req_id >> 8) != active_->op_id) return;
        auto& a = *active_;
        suspects_.erase(h.src);
        auto log = resp.log_id;
        if (a.req.op == Op::WeakGet && resp.term < session_term(log)) {
            // An answer from behind our session is never accepted.
            ++stats_.stale_rejected;
            schedule_resend(next_replica(h.src), now + config_.probe_delay);
            return;
        }
        auto& st = session_[log];
        st = std::max(st, resp.term);
        if (resp.status == Status::StaleLeader) {
            ++stats_.retries;
            if (leaders_[log] == h.src) leaders_.erase(log);
            if (a.hops < kMaxImmediateHops) {
                ++a.hops;
                a.target = next_replica(h.src);
                send_attempt(now);
            } else {
                a.hops = 0;
                schedule_resend(next_replica(h.src), now + config_.probe_delay);
            }
            return;
        }
        if (retryable(resp.status)) {
            ++stats_.retries;
            if (resp.status == Status::GangRetry) ++stats_.gang_retries;
            leaders_[log] = h.src;
            schedule_resend(h.src, now + config_.retry_backoff);
            return;
        }
        if (resp.status != Status::BadRequest) leaders_[log] = h.src;
        ClientResult out;
        out.status = resp.status;
        out.value = std::move(resp.value);
        out.term = resp.term;
        out.snapshot_id = resp.snapshot_id;
        out.served_by = h.src;
        finish(std::move(out), now);
    } else if (h.type == MsgType::Redirect) {
        auto m = decode_redirect(r);
        if (!active_ || (m.req_id >> 8) != active_->op_id) return;
        auto& a = *active_;
        ++stats_.redirects;
        suspects_.erase(h.src);
        if (m.leader == kNoNode || m.leader == h.src) return;
        leaders_[h.instance] = m.leader;
        if (!suspect(m.leader, now) && a.hops < kMaxImmediateHops) {
            ++a.hops;
            a.target = m.leader;
            send_attempt(now);
        } else {
            a.hops = 0;
            schedule_resend(suspect(m.leader, now) ? next_replica(h.src) : m.leader, now + config_.probe_delay);
        }
    }
}

void Client::tick(TimeNs now) {
    std::erase_if(suspects_, [now](const auto& kv) { return kv.second <= now; });
    if (!active_) return;
    auto& a = *active_;
    if (a.resend_at != 0) {
        if (now >= a.resend_at) send_attempt(now);
        return;
    }
    if (a.deadline != 0 && now >= a.deadline) {
        ++stats_.timeouts;
        suspects_[a.target] = now + config_.suspect_for;
        auto log = a.req.log_id;
        if (leaders_.count(log) && leaders_[log] == a.target) leaders_.erase(log);
        a.hops = 0;
        a.target = next_replica(a.target);
        send_attempt(now);
    }
}

TimeNs Client::next_deadline() const {
    if (!active_) return std::numeric_limits<TimeNs>::max();
    return active_->resend_at != 0 ? active_->resend_at : active_->deadline;
}

std::uint64_t Client::session_term(std::uint16_t log) const {
    auto it = session_.find(log);
    return it == session_.end() ? 0 : it->second;
}

NodeId Client::cached_leader(std::uint16_t log) const {
    auto it = leaders_.find(log);
    return it == leaders_.end() ? kNoNode : it->second;
}

}  // namespace cyclone
