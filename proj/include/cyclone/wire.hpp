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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cyclone/common.hpp"
#include "cyclone/payload.hpp"

namespace cyclone {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xFFFFFFFFu;

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kMtu = 9000;
inline constexpr std::size_t kCommonHeaderSize = 16;
/// Largest log entry body; leaves room for an AppendEntries header.
inline constexpr std::size_t kMaxEntryBytes = 8900;
/// Largest encoded client request accepted by the client library.
inline constexpr std::size_t kMaxRequestBytes = 8192;
inline constexpr std::size_t kMaxBatch = 32;

enum class MsgType : std::uint8_t {
    ClientRequest = 1,
    ClientResponse = 2,
    AppendEntries = 3,
    AppendResponse = 4,
    RequestVote = 5,
    VoteResponse = 6,
    Redirect = 7,
    CampaignHint = 8,
};

const char* to_string(MsgType t);

struct CommonHeader {
    std::uint8_t version = kWireVersion;
    MsgType type = MsgType::ClientRequest;
    std::uint64_t term = 0;
    std::uint16_t instance = 0;
    NodeId src = 0;
};

void encode_common(ByteWriter& w, const CommonHeader& h);
CommonHeader decode_common(ByteReader& r);

// ---------------------------------------------------------------------------
// RAFT messages. Entry bytes travel in the packet payload chain.

struct EntryDesc {
    std::uint64_t term = 0;
    std::uint64_t index = 0;
    std::uint32_t length = 0;
};

struct AppendEntriesMsg {
    std::uint64_t prev_index = 0;
    std::uint64_t prev_term = 0;
    std::uint64_t commit_index = 0;
    std::vector<EntryDesc> entries;
};
inline constexpr std::size_t kAppendEntriesFixed = 8 * 3 + 2;
inline constexpr std::size_t kEntryDescSize = 20;

struct AppendResponseMsg {
    bool success = false;
    std::uint64_t match_index = 0;  // on failure: the index the follower wants next
};

struct RequestVoteMsg {
    std::uint64_t last_index = 0;
    std::uint64_t last_term = 0;
};

struct VoteResponseMsg {
    bool granted = false;
};

Bytes encode(const CommonHeader& h, const AppendEntriesMsg& m);
Bytes encode(const CommonHeader& h, const AppendResponseMsg& m);
Bytes encode(const CommonHeader& h, const RequestVoteMsg& m);
Bytes encode(const CommonHeader& h, const VoteResponseMsg& m);
Bytes encode_bare(const CommonHeader& h);

AppendEntriesMsg decode_append_entries(ByteReader& r);
AppendResponseMsg decode_append_response(ByteReader& r);
RequestVoteMsg decode_request_vote(ByteReader& r);
VoteResponseMsg decode_vote_response(ByteReader& r);

/// Splits a chain into consecutive pieces of the given lengths without copying.
std::vector<PayloadChain> split_chain(const PayloadChain& chain, const std::vector<std::uint32_t>& lengths);

// ---------------------------------------------------------------------------
// Client protocol

enum class Op : std::uint8_t {
    Get = 1,  // quorum read, goes through the log
    Put = 2,
    Delete = 3,
    WeakGet = 4,
    Gang = 5,  // atomic write batch across logs
    Snapshot = 6,
};

enum class Status : std::uint8_t {
    Ok = 0,
    NotFound = 1,
    LogFull = 2,
    NotColocated = 3,
    GangRetry = 4,
    StaleLeader = 5,
    WeakTimeout = 6,
    TooLarge = 7,
    Unavailable = 8,
    BadRequest = 9,
};

const char* to_string(Op op);
const char* to_string(Status s);
bool retryable(Status s);

struct GangItem {
    Op op = Op::Put;  // Put or Delete
    std::string key;
    std::string value;
};

/// Owned form used by the client library to build requests.
struct Request {
    Op op = Op::Get;
    NodeId client = 0;
    std::uint64_t req_id = 0;
    std::uint64_t session_term = 0;
    std::uint16_t log_id = 0;
    std::string key;
    std::string value;
    // Gang: items grouped by target log.
    std::vector<std::pair<std::uint16_t, std::vector<GangItem>>> sections;
};

Bytes encode_request(const Request& req);

/// Zero-copy view over an encoded request; spans point into the packet.
struct RequestView {
    Op op = Op::Get;
    NodeId client = 0;
    std::uint64_t req_id = 0;
    std::uint64_t session_term = 0;
    std::uint16_t log_id = 0;
    ByteSpan key;
    ByteSpan value;
    ByteSpan sections;  // Gang only: raw section area

    struct Item {
        Op op;
        ByteSpan key;
        ByteSpan value;
    };
    /// Items of the section for `log`, empty if there is none.
    [[nodiscard]] std::vector<Item> items_for(std::uint16_t log) const;
    [[nodiscard]] std::vector<std::uint16_t> section_logs() const;
};

RequestView decode_request(ByteSpan bytes);

struct Response {
    std::uint64_t req_id = 0;
    Status status = Status::Ok;
    std::uint64_t term = 0;  // server's term for the log, for session tracking
    std::uint16_t log_id = 0;
    std::string value;
    std::uint64_t snapshot_id = 0;
};

Bytes encode_response(const CommonHeader& h, const Response& resp);
Response decode_response(const CommonHeader& h, ByteReader& r);

struct RedirectMsg {
    std::uint64_t req_id = 0;
    NodeId leader = kNoNode;
};
Bytes encode(const CommonHeader& h, const RedirectMsg& m);
RedirectMsg decode_redirect(ByteReader& r);

// ---------------------------------------------------------------------------
// Log entry bodies

enum class EntryKind : std::uint8_t { Noop = 0, Batch = 1, Ganged = 2 };

inline constexpr std::size_t kNonceSize = 14;
using NonceBytes = std::array<std::byte, kNonceSize>;

struct GangHeader {
    NonceBytes nonce{};
    std::vector<std::pair<std::uint16_t, std::uint64_t>> view;  // (log_id, term)
};

/// Batch: kind, count u16, lengths u32 x count, then the requests.
Bytes encode_batch_header(const std::vector<std::uint32_t>& lengths);
/// Ganged: kind, nonce, count u16, (log_id u16, term u64) x count, then the request.
Bytes encode_gang_header(const GangHeader& g);

struct EntryView {
    EntryKind kind = EntryKind::Noop;
    std::vector<ByteSpan> requests;  // Batch
    GangHeader gang;                 // Ganged
    ByteSpan gang_request;           // Ganged
};

/// Parses an entry body. The spans alias `body`.
EntryView decode_entry(ByteSpan body);

}  // namespace cyclone
