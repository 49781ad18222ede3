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

#include "cyclone/payload.hpp"

#include <cstring>

namespace cyclone {

namespace {

class HeapBlock final : public PayloadBlock {
public:
    explicit HeapBlock(Bytes bytes) : bytes_(std::move(bytes)) {}
    [[nodiscard]] ByteSpan bytes() const override { return bytes_; }

private:
    Bytes bytes_;
};

}  // namespace

PayloadHandle::PayloadHandle(std::shared_ptr<const PayloadBlock> block, std::size_t offset,
                             std::size_t length)
    : block_(std::move(block)), offset_(offset), length_(length) {}

PayloadHandle PayloadHandle::adopt(Bytes bytes) {
    auto n = bytes.size();
    return PayloadHandle(std::make_shared<HeapBlock>(std::move(bytes)), 0, n);
}

ByteSpan PayloadHandle::bytes() const {
    if (!block_) return {};
    return block_->bytes().subspan(offset_, length_);
}

PayloadHandle PayloadHandle::slice(std::size_t offset, std::size_t length) const {
    if (offset > length_ || length > length_ - offset) {
        fail(ErrorCode::ContractViolation, "payload slice out of range");
    }
    return PayloadHandle(block_, offset_ + offset, length);
}

Bytes PayloadHandle::deep_copy() const {
    auto b = bytes();
    auto& c = copy_counters();
    c.payload_copies.fetch_add(1, std::memory_order_relaxed);
    c.payload_bytes_copied.fetch_add(b.size(), std::memory_order_relaxed);
    return Bytes(b.begin(), b.end());
}

std::size_t chain_size(const PayloadChain& chain) {
    std::size_t n = 0;
    for (const auto& h : chain) n += h.size();
    return n;
}

void gather(const PayloadChain& chain, std::span<std::byte> out) {
    std::size_t pos = 0;
    for (const auto& h : chain) {
        auto b = h.bytes();
        if (b.empty()) continue;
        std::memcpy(out.data() + pos, b.data(), b.size());
        pos += b.size();
    }
}

Bytes flatten(const PayloadChain& chain) {
    Bytes out(chain_size(chain));
    gather(chain, out);
    auto& c = copy_counters();
    c.payload_copies.fetch_add(1, std::memory_order_relaxed);
    c.payload_bytes_copied.fetch_add(out.size(), std::memory_order_relaxed);
    return out;
}

void CopyCounters::reset() {
    payload_copies = 0;
    payload_bytes_copied = 0;
    socket_serializations = 0;
    socket_bytes = 0;
}

CopyCounters& copy_counters() {
    static CopyCounters counters;
    return counters;
}

}  // namespace cyclone
