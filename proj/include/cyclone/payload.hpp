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
#include <memory>
#include <vector>

#include "cyclone/common.hpp"

namespace cyclone {

/// Backing storage for payload bytes. Lifetime is governed by the
/// shared_ptr reference count held by PayloadHandle instances.
class PayloadBlock {
public:
    virtual ~PayloadBlock() = default;
    [[nodiscard]] virtual ByteSpan bytes() const = 0;
};

/**
 * Reference-counted view over a payload block.
 *
 * Copying a handle never copies bytes; it only bumps the block refcount.
 * This is the "chain the data packet to each header" primitive: one payload,
 * any number of per-destination headers referencing it.
 */
class PayloadHandle {
public:
    PayloadHandle() = default;
    PayloadHandle(std::shared_ptr<const PayloadBlock> block, std::size_t offset, std::size_t length);

    /// Takes ownership of `bytes` (no copy).
    static PayloadHandle adopt(Bytes bytes);

    [[nodiscard]] ByteSpan bytes() const;
    [[nodiscard]] std::size_t size() const { return length_; }
    [[nodiscard]] bool empty() const { return length_ == 0; }
    [[nodiscard]] PayloadHandle slice(std::size_t offset, std::size_t length) const;
    [[nodiscard]] long use_count() const { return block_.use_count(); }
    [[nodiscard]] const PayloadBlock* block() const { return block_.get(); }

    /// Materializes an owned copy. Counted as a payload copy.
    [[nodiscard]] Bytes deep_copy() const;

private:
    std::shared_ptr<const PayloadBlock> block_;
    std::size_t offset_ = 0;
    std::size_t length_ = 0;
};

using PayloadChain = std::vector<PayloadHandle>;

std::size_t chain_size(const PayloadChain& chain);
/// Gathers a chain into `out`, which must be chain_size() bytes. Used only
/// by persistence and socket serialization, which are accounted separately.
void gather(const PayloadChain& chain, std::span<std::byte> out);
/// Gathers a chain into a fresh buffer. Counted as a payload copy.
Bytes flatten(const PayloadChain& chain);

/// Process-wide copy instrumentation.
struct CopyCounters {
    std::atomic<std::uint64_t> payload_copies{0};
    std::atomic<std::uint64_t> payload_bytes_copied{0};
    std::atomic<std::uint64_t> socket_serializations{0};
    std::atomic<std::uint64_t> socket_bytes{0};

    void reset();
};

CopyCounters& copy_counters();

}  // namespace cyclone
