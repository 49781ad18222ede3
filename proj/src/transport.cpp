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

#include "cyclone/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>

namespace cyclone {

std::uint16_t packet_instance(const Packet& p) {
    if (p.header.size() < kCommonHeaderSize) fail(ErrorCode::DecodeError, "short header");
    return static_cast<std::uint16_t>(static_cast<unsigned>(p.header[10]) | (static_cast<unsigned>(p.header[11]) << 8));
}

MsgType packet_type(const Packet& p) {
    if (p.header.size() < kCommonHeaderSize) fail(ErrorCode::DecodeError, "short header");
    return static_cast<MsgType>(p.header[1]);
}

void InboundQueues::push(Packet p) {
    auto q = route(packet_instance(p));
    queues_[q].push_back(std::move(p));
}

std::vector<Packet> InboundQueues::pop(std::uint16_t instance, std::size_t max) {
    auto& q = queues_[route(instance)];
    std::vector<Packet> out;
    auto n = std::min(max, q.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(std::move(q.front()));
        q.pop_front();
    }
    return out;
}

std::size_t InboundQueues::size(std::uint16_t instance) const { return queues_[route(instance)].size(); }

void InboundQueues::clear() {
    for (auto& q : queues_) q.clear();
}

void Transport::send_multicast(const PayloadChain& payload, std::span<const NodeId> dests,
                               const std::function<Bytes(NodeId)>& header_fn) {
    for (auto dst : dests) {
        Packet p;
        p.src = self();
        p.dst = dst;
        p.header = header_fn(dst);
        p.payload = payload;  // handle copies only
        send(std::move(p));
    }
}

// ---------------------------------------------------------------------------
// SimEndpoint / SimNetwork

void SimEndpoint::send(Packet p) {
    if (p.size() > net_.config_.mtu) {
        fail(ErrorCode::SendTooLarge, std::to_string(p.size()) + " bytes exceeds mtu " + std::to_string(net_.config_.mtu));
    }
    p.src = id_;
    auto depart = clock_ ? clock_() : net_.loop_.now();
    net_.transmit(std::move(p), depart);
}

std::vector<Packet> SimEndpoint::recv_batch(std::uint16_t instance, std::size_t max) {
    return inbound_.pop(instance, max);
}

std::size_t SimEndpoint::mtu() const { return net_.config_.mtu; }

SimNetwork::SimNetwork(EventLoop& loop, SimNetConfig config)
    : loop_(loop), config_(std::move(config)), rng_(config_.seed) {}

SimEndpoint& SimNetwork::attach(NodeId id, std::size_t instances) {
    auto& slot = endpoints_[id];
    if (slot) fail(ErrorCode::ContractViolation, "node " + std::to_string(id) + " already attached");
    slot = std::make_unique<SimEndpoint>(*this, id, instances);
    up_[id] = true;
    return *slot;
}

SimEndpoint& SimNetwork::endpoint(NodeId id) {
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) fail(ErrorCode::ContractViolation, "unknown node " + std::to_string(id));
    return *it->second;
}

void SimNetwork::set_up(NodeId id, bool up) {
    up_[id] = up;
    if (!up) endpoint(id).inbound_.clear();
}

bool SimNetwork::up(NodeId id) const {
    auto it = up_.find(id);
    return it != up_.end() && it->second;
}

bool SimNetwork::connected(NodeId a, NodeId b, TimeNs at) const {
    for (const auto& w : config_.partitions) {
        if (at < w.start || at >= w.end) continue;
        bool in_a = std::find(w.side.begin(), w.side.end(), a) != w.side.end();
        bool in_b = std::find(w.side.begin(), w.side.end(), b) != w.side.end();
        if (in_a != in_b) return false;
    }
    return true;
}

void SimNetwork::record(const char* event, const Packet& p, TimeNs at) {
    auto type = p.header.size() >= 2 ? static_cast<unsigned>(p.header[1]) : 0u;
    std::uint64_t fields[] = {at, static_cast<std::uint64_t>(event[0]), p.src, p.dst, type, p.size()};
    trace_hash_ = fnv1a64(ByteSpan(reinterpret_cast<const std::byte*>(fields), sizeof fields), trace_hash_);
    if (trace_) {
        char line[160];
        std::snprintf(line, sizeof line,
                      "{\"time\":%llu,\"event\":\"%s\",\"src\":%u,\"dst\":%u,\"msg_type\":\"%s\",\"size\":%zu}\n",
                      static_cast<unsigned long long>(at), event, p.src, p.dst,
                      type >= 1 && type <= 8 ? to_string(static_cast<MsgType>(type)) : "?", p.size());
        *trace_ << line;
    }
}

void SimNetwork::transmit(Packet p, TimeNs depart) {
    ++stats_.sent;
    stats_.bytes += p.size();
    if (!up(p.src) || !up(p.dst) || endpoints_.count(p.dst) == 0 || !connected(p.src, p.dst, depart) ||
        rng_.chance(config_.drop)) {
        ++stats_.dropped;
        record("drop", p, depart);
        return;
    }
    auto delay = config_.base_delay + static_cast<TimeNs>(rng_.exponential(config_.jitter_mean_ns));
    if (rng_.chance(config_.reorder)) delay += rng_.below(config_.reorder_extra + 1);
    record("send", p, depart);
    auto at = depart + delay;
    loop_.at(at, [this, p = std::move(p), at]() mutable {
        if (!up(p.dst) || !connected(p.src, p.dst, at)) {
            ++stats_.dropped;
            record("drop", p, at);
            return;
        }
        ++stats_.delivered;
        record("deliver", p, at);
        auto& ep = *endpoints_.at(p.dst);
        auto instance = packet_instance(p);
        ep.inbound_.push(std::move(p));
        if (ep.on_arrival_) ep.on_arrival_(instance);
    });
}

// ---------------------------------------------------------------------------
// UDP

namespace {

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) {
        fail(ErrorCode::BindFailed, "bad IPv4 address " + host);
    }
    return a;
}

}  // namespace

UdpTransport::UdpTransport(NodeId self, const std::string& host, std::uint16_t port, std::size_t instances)
    : self_(self), inbound_(instances) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
    if (fd_ < 0) fail(ErrorCode::BindFailed, std::string("socket: ") + std::strerror(errno));
    int size = 8 << 20;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &size, sizeof size);
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &size, sizeof size);
    auto addr = make_addr(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        auto err = std::string(std::strerror(errno));
        ::close(fd_);
        fd_ = -1;
        fail(ErrorCode::BindFailed, "bind " + host + ":" + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

UdpTransport::~UdpTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void UdpTransport::add_peer(NodeId id, const std::string& host, std::uint16_t port) {
    make_addr(host, port);
    std::lock_guard lock(mu_);
    peers_[id] = {host, port};
}

void UdpTransport::send(Packet p) {
    if (p.size() > kMtu) {
        fail(ErrorCode::SendTooLarge, std::to_string(p.size()) + " bytes exceeds mtu");
    }
    sockaddr_in addr{};
    {
        std::lock_guard lock(mu_);
        auto it = peers_.find(p.dst);
        if (it == peers_.end()) return;  // unknown destination: dropped
        addr = make_addr(it->second.first, it->second.second);
    }
    Bytes frame(2 + p.size());
    frame[0] = static_cast<std::byte>(p.header.size() & 0xFF);
    frame[1] = static_cast<std::byte>(p.header.size() >> 8);
    std::memcpy(frame.data() + 2, p.header.data(), p.header.size());
    gather(p.payload, std::span<std::byte>(frame.data() + 2 + p.header.size(), chain_size(p.payload)));
    auto& c = copy_counters();
    c.socket_serializations.fetch_add(1, std::memory_order_relaxed);
    c.socket_bytes.fetch_add(frame.size(), std::memory_order_relaxed);
    ::sendto(fd_, frame.data(), frame.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
}

std::size_t UdpTransport::pump() {
    std::size_t n = 0;
    for (;;) {
        Bytes buf(kMtu + 64);
        auto got = ::recv(fd_, buf.data(), buf.size(), 0);
        if (got < 0) break;
        if (got < static_cast<ssize_t>(2 + kCommonHeaderSize)) continue;
        buf.resize(static_cast<std::size_t>(got));
        std::size_t hlen = static_cast<std::size_t>(buf[0]) | (static_cast<std::size_t>(buf[1]) << 8);
        if (hlen < kCommonHeaderSize || 2 + hlen > buf.size()) continue;
        Packet p;
        p.dst = self_;
        p.header.assign(buf.begin() + 2, buf.begin() + 2 + static_cast<long>(hlen));
        p.src = load_u32(p.header.data() + 12);
        auto body = buf.size() - 2 - hlen;
        auto whole = PayloadHandle::adopt(std::move(buf));
        if (body > 0) p.payload.push_back(whole.slice(2 + hlen, body));
        try {
            std::lock_guard lock(mu_);
            inbound_.push(std::move(p));
        } catch (const Error&) {
            continue;
        }
        ++n;
    }
    return n;
}

bool UdpTransport::wait_readable(TimeNs timeout) {
    pollfd pfd{fd_, POLLIN, 0};
    auto ms = static_cast<int>((timeout + kMillis - 1) / kMillis);
    return ::poll(&pfd, 1, ms) > 0;
}

std::vector<Packet> UdpTransport::recv_batch(std::uint16_t instance, std::size_t max) {
    pump();
    std::lock_guard lock(mu_);
    return inbound_.pop(instance, max);
}

std::size_t UdpTransport::queued(std::uint16_t instance) const {
    std::lock_guard lock(mu_);
    return inbound_.size(instance);
}

}  // namespace cyclone
