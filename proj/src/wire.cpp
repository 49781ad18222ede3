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

#include "cyclone/wire.hpp"

namespace cyclone {

const char* to_string(MsgType t) {
    switch (t) {
        case MsgType::ClientRequest: return "ClientRequest";
        case MsgType::ClientResponse: return "ClientResponse";
        case MsgType::AppendEntries: return "AppendEntries";
        case MsgType::AppendResponse: return "AppendResponse";
        case MsgType::RequestVote: return "RequestVote";
        case MsgType::VoteResponse: return "VoteResponse";
        case MsgType::Redirect: return "Redirect";
        case MsgType::CampaignHint: return "CampaignHint";
    }
    return "Unknown";
}

const char* to_string(Op op) {
    switch (op) {
        case Op::Get: return "get";
        case Op::Put: return "put";
        case Op::Delete: return "delete";
        case Op::WeakGet: return "weak_get";
        case Op::Gang: return "gang";
        case Op::Snapshot: return "snapshot";
    }
    return "unknown";
}

const char* to_string(Status s) {
    switch (s) {
        case Status::Ok: return "Ok";
        case Status::NotFound: return "NotFound";
        case Status::LogFull: return "LogFull";
        case Status::NotColocated: return "NotColocated";
        case Status::GangRetry: return "GangRetry";
        case Status::StaleLeader: return "StaleLeader";
        case Status::WeakTimeout: return "WeakTimeout";
        case Status::TooLarge: return "TooLarge";
        case Status::Unavailable: return "Unavailable";
        case Status::BadRequest: return "BadRequest";
    }
    return "Unknown";
}

bool retryable(Status s) {
    return s == Status::LogFull || s == Status::NotColocated || s == Status::GangRetry || s == Status::StaleLeader ||
           s == Status::WeakTimeout;
}

void encode_common(ByteWriter& w, const CommonHeader& h) {
    w.u8(h.version).u8(static_cast<std::uint8_t>(h.type)).u64(h.term).u16(h.instance).u32(h.src);
}

CommonHeader decode_common(ByteReader& r) {
    CommonHeader h;
    h.version = r.u8();
    if (h.version != kWireVersion) fail(ErrorCode::DecodeError, "wire version " + std::to_string(h.version));
    auto t = r.u8();
    if (t < 1 || t > 8) fail(ErrorCode::DecodeError, "unknown message type " + std::to_string(t));
    h.type = static_cast<MsgType>(t);
    h.term = r.u64();
    h.instance = r.u16();
    h.src = r.u32();
    return h;
}

Bytes encode(const CommonHeader& h, const AppendEntriesMsg& m) {
    ByteWriter w(kCommonHeaderSize + kAppendEntriesFixed + m.entries.size() * kEntryDescSize);
    encode_common(w, h);
    w.u64(m.prev_index).u64(m.prev_term).u64(m.commit_index).u16(static_cast<std::uint16_t>(m.entries.size()));
    for (const auto& e : m.entries) w.u64(e.term).u64(e.index).u32(e.length);
    return w.take();
}

Bytes encode(const CommonHeader& h, const AppendResponseMsg& m) {
    ByteWriter w(kCommonHeaderSize + 9);
    encode_common(w, h);
    w.u8(m.success ? 1 : 0).u64(m.match_index);
    return w.take();
}

Bytes encode(const CommonHeader& h, const RequestVoteMsg& m) {
    ByteWriter w(kCommonHeaderSize + 16);
    encode_common(w, h);
    w.u64(m.last_index).u64(m.last_term);
    return w.take();
}

Bytes encode(const CommonHeader& h, const VoteResponseMsg& m) {
    ByteWriter w(kCommonHeaderSize + 1);
    encode_common(w, h);
    w.u8(m.granted ? 1 : 0);
    return w.take();
}

Bytes encode_bare(const CommonHeader& h) {
    ByteWriter w(kCommonHeaderSize);
    encode_common(w, h);
    return w.take();
}

AppendEntriesMsg decode_append_entries(ByteReader& r) {
    AppendEntriesMsg m;
    m.prev_index = r.u64();
    m.prev_term = r.u64();
    m.commit_index = r.u64();
    auto n = r.u16();
    m.entries.resize(n);
    for (auto& e : m.entries) {
        e.term = r.u64();
        e.index = r.u64();
        e.length = r.u32();
    }
    return m;
}

AppendResponseMsg decode_append_response(ByteReader& r) {
    AppendResponseMsg m;
    m.success = r.u8() != 0;
    m.match_index = r.u64();
    return m;
}

RequestVoteMsg decode_request_vote(ByteReader& r) {
    RequestVoteMsg m;
    m.last_index = r.u64();
    m.last_term = r.u64();
    return m;
}

VoteResponseMsg decode_vote_response(ByteReader& r) {
    VoteResponseMsg m;
    m.granted = r.u8() != 0;
    return m;
}

std::vector<PayloadChain> split_chain(const PayloadChain& chain, const std::vector<std::uint32_t>& lengths) {
    std::vector<PayloadChain> out;
    out.reserve(lengths.size());
    std::size_t part = 0, off = 0;
    for (auto len : lengths) {
        PayloadChain piece;
        std::size_t need = len;
        while (need > 0) {
            if (part >= chain.size()) fail(ErrorCode::DecodeError, "payload shorter than the entry lengths");
            const auto& h = chain[part];
            auto n = std::min(need, h.size() - off);
            if (n > 0) piece.push_back(h.slice(off, n));
            off += n;
            need -= n;
            if (off == h.size()) {
                ++part;
                off = 0;
            }
        }
        out.push_back(std::move(piece));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Client protocol

namespace {

void put_key(ByteWriter& w, std::string_view k) {
    if (k.size() > 0xFFFF) fail(ErrorCode::ContractViolation, "key too long");
    w.u16(static_cast<std::uint16_t>(k.size())).bytes(ByteSpan(reinterpret_cast<const std::byte*>(k.data()), k.size()));
}

void put_value(ByteWriter& w, std::string_view v) {
    w.u32(static_cast<std::uint32_t>(v.size())).bytes(ByteSpan(reinterpret_cast<const std::byte*>(v.data()), v.size()));
}

ByteSpan get_key(ByteReader& r) { return r.bytes(r.u16()); }
ByteSpan get_value(ByteReader& r) { return r.bytes(r.u32()); }

Op checked_op(std::uint8_t v) {
    if (v < 1 || v > 6) fail(ErrorCode::DecodeError, "unknown op " + std::to_string(v));
    return static_cast<Op>(v);
}

}  // namespace

Bytes encode_request(const Request& req) {
    ByteWriter w(64 + req.key.size() + req.value.size());
    w.u8(static_cast<std::uint8_t>(req.op)).u32(req.client).u64(req.req_id).u64(req.session_term).u16(req.log_id);
    switch (req.op) {
        case Op::Get:
        case Op::Delete:
        case Op::WeakGet: put_key(w, req.key); break;
        case Op::Put:
            put_key(w, req.key);
            put_value(w, req.value);
            break;
        case Op::Gang:
            w.u16(static_cast<std::uint16_t>(req.sections.size()));
            for (const auto& [log, items] : req.sections) {
                w.u16(log).u16(static_cast<std::uint16_t>(items.size()));
                for (const auto& it : items) {
                    w.u8(static_cast<std::uint8_t>(it.op));
                    put_key(w, it.key);
                    if (it.op == Op::Put) put_value(w, it.value);
                }
            }
            break;
        case Op::Snapshot: break;
    }
    return w.take();
}

RequestView decode_request(ByteSpan bytes) {
    ByteReader r(bytes);
    RequestView v;
    v.op = checked_op(r.u8());
    v.client = r.u32();
    v.req_id = r.u64();
    v.session_term = r.u64();
    v.log_id = r.u16();
    switch (v.op) {
        case Op::Get:
        case Op::Delete:
        case Op::WeakGet: v.key = get_key(r); break;
        case Op::Put:
            v.key = get_key(r);
            v.value = get_value(r);
            break;
        case Op::Gang: {
            v.sections = r.rest();
            // Validate the whole section area up front.
            auto n = r.u16();
            for (std::uint16_t s = 0; s < n; ++s) {
                r.u16();
                auto count = r.u16();
                for (std::uint16_t i = 0; i < count; ++i) {
                    auto op = checked_op(r.u8());
                    if (op != Op::Put && op != Op::Delete) fail(ErrorCode::DecodeError, "gang item must write");
                    get_key(r);
                    if (op == Op::Put) get_value(r);
                }
            }
            break;
        }
        case Op::Snapshot: break;
    }
    return v;
}

std::vector<RequestView::Item> RequestView::items_for(std::uint16_t log) const {
    std::vector<Item> out;
    if (op != Op::Gang) return out;
    ByteReader r(sections);
    auto n = r.u16();
    for (std::uint16_t s = 0; s < n; ++s) {
        auto id = r.u16();
        auto count = r.u16();
        for (std::uint16_t i = 0; i < count; ++i) {
            Item it{static_cast<Op>(r.u8()), {}, {}};
            it.key = get_key(r);
            if (it.op == Op::Put) it.value = get_value(r);
            if (id == log) out.push_back(it);
        }
    }
    return out;
}

std::vector<std::uint16_t> RequestView::section_logs() const {
    std::vector<std::uint16_t> out;
    if (op != Op::Gang) return out;
    ByteReader r(sections);
    auto n = r.u16();
    for (std::uint16_t s = 0; s < n; ++s) {
        out.push_back(r.u16());
        auto count = r.u16();
        for (std::uint16_t i = 0; i < count; ++i) {
            auto item_op = static_cast<Op>(r.u8());
            get_key(r);
            if (item_op == Op::Put) get_value(r);
        }
    }
    return out;
}

Bytes encode_response(const CommonHeader& h, const Response& resp) {
    ByteWriter w(kCommonHeaderSize + 32 + resp.value.size());
    encode_common(w, h);
    w.u64(resp.req_id).u8(static_cast<std::uint8_t>(resp.status)).u16(resp.log_id).u64(resp.snapshot_id);
    put_value(w, resp.value);
    return w.take();
}

Response decode_response(const CommonHeader& h, ByteReader& r) {
    Response resp;
    resp.term = h.term;
    resp.req_id = r.u64();
    auto s = r.u8();
    if (s > 9) fail(ErrorCode::DecodeError, "unknown status");
    resp.status = static_cast<Status>(s);
    resp.log_id = r.u16();
    resp.snapshot_id = r.u64();
    resp.value = to_string(get_value(r));
    return resp;
}

Bytes encode(const CommonHeader& h, const RedirectMsg& m) {
    ByteWriter w(kCommonHeaderSize + 12);
    encode_common(w, h);
    w.u64(m.req_id).u32(m.leader);
    return w.take();
}

RedirectMsg decode_redirect(ByteReader& r) {
    RedirectMsg m;
    m.req_id = r.u64();
    m.leader = r.u32();
    return m;
}

// ---------------------------------------------------------------------------
// Entry bodies

Bytes encode_batch_header(const std::vector<std::uint32_t>& lengths) {
    ByteWriter w(3 + 4 * lengths.size());
    w.u8(static_cast<std::uint8_t>(EntryKind::Batch)).u16(static_cast<std::uint16_t>(lengths.size()));
    for (auto l : lengths) w.u32(l);
    return w.take();
}

Bytes encode_gang_header(const GangHeader& g) {
    ByteWriter w(1 + kNonceSize + 2 + 10 * g.view.size());
    w.u8(static_cast<std::uint8_t>(EntryKind::Ganged)).bytes(g.nonce).u16(static_cast<std::uint16_t>(g.view.size()));
    for (auto [log, term] : g.view) w.u16(log).u64(term);
    return w.take();
}

EntryView decode_entry(ByteSpan body) {
    EntryView v;
    if (body.empty()) return v;
    ByteReader r(body);
    auto kind = r.u8();
    switch (kind) {
        case 0: v.kind = EntryKind::Noop; break;
        case 1: {
            v.kind = EntryKind::Batch;
            auto n = r.u16();
            std::vector<std::uint32_t> lens(n);
            for (auto& l : lens) l = r.u32();
            for (auto l : lens) v.requests.push_back(r.bytes(l));
            break;
        }
        case 2: {
            v.kind = EntryKind::Ganged;
            auto nonce = r.bytes(kNonceSize);
            std::copy(nonce.begin(), nonce.end(), v.gang.nonce.begin());
            auto n = r.u16();
            for (std::uint16_t i = 0; i < n; ++i) {
                auto log = r.u16();
                auto term = r.u64();
                v.gang.view.emplace_back(log, term);
            }
            v.gang_request = r.rest();
            break;
        }
        default: fail(ErrorCode::DecodeError, "unknown entry kind " + std::to_string(kind));
    }
    return v;
}

}  // namespace cyclone
