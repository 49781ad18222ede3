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
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "cyclone/medium.hpp"
#include "cyclone/payload.hpp"

namespace cyclone {

inline constexpr std::uint64_t kNvmMagic = 0x4359434C4F4E4531ULL;  // "CYCLONE1"
inline constexpr std::uint32_t kNvmVersion = 1;
inline constexpr std::size_t kNvmHeaderSize = 64;
inline constexpr std::size_t kNvmMetaOffset = 64;
inline constexpr std::size_t kNvmMetaRecordSize = 32;
inline constexpr std::size_t kNvmRingOffset = 128;
inline constexpr std::size_t kPointerSlotSize = 40;
inline constexpr std::size_t kPoolGranularity = 64;
inline constexpr std::uint64_t kNoLsn = ~0ULL;

struct NvmConfig {
    std::uint64_t capacity = 64ULL << 20;
    std::uint32_t ring_capacity = 4096;
    std::uint32_t max_entry = 9000;
};

/// One 40-byte ring record. Valid iff offset != 0 and the seal verifies.
struct PointerSlot {
    std::uint64_t offset = 0;
    std::uint32_t length = 0;
    std::uint64_t lsn = 0;
    std::uint64_t term = 0;
    std::uint64_t index = 0;
    std::uint32_t seal = 0;

    void encode(std::byte* out) const;
    static PointerSlot decode(const std::byte* in);
    [[nodiscard]] std::uint32_t compute_seal() const;
    [[nodiscard]] bool valid() const { return offset != 0 && seal == compute_seal(); }
};

/// Persistent RAFT metadata kept in the region's reserved area.
struct RaftMeta {
    std::uint64_t term = 0;
    std::optional<std::uint32_t> voted_for;
};

struct NvmEntry {
    std::uint64_t lsn = 0;
    std::uint64_t term = 0;
    std::uint64_t index = 0;
    PayloadHandle payload;
};

/**
 * The top-level persistent log of one physical log.
 *
 * A circular array of fixed-size pointer slots indexes payload buffers in an
 * arena managed by a first-fit pool. The ring position of an entry is
 * lsn % ring_capacity. Appends write the payload, persist it, then write and
 * persist the sealed slot, so a torn append is never visible after recovery.
 *
 * Arena buffers are released only once the slot is gone and no PayloadHandle
 * (for example a packet still queued for transmission) references them.
 * Single owner; handles may be dropped from any thread.
 */
class NvmRegion {
public:
    static std::unique_ptr<NvmRegion> open(std::shared_ptr<Medium> medium, const NvmConfig& config = {});
    static std::unique_ptr<NvmRegion> open_file(const std::filesystem::path& path,
                                                const NvmConfig& config = {});

    ~NvmRegion();
    NvmRegion(const NvmRegion&) = delete;
    NvmRegion& operator=(const NvmRegion&) = delete;

    std::uint64_t append(std::uint64_t term, std::uint64_t index, ByteSpan payload);
    std::uint64_t append(std::uint64_t term, std::uint64_t index, const PayloadChain& payload);

    /// Removes entries with lsn <= upto_lsn. kNoLsn means "nothing".
    std::uint64_t truncate_front(std::uint64_t upto_lsn);
    /// Removes entries with RAFT index >= from_index.
    std::uint64_t truncate_back(std::uint64_t from_index);

    /// Only valid on an empty ring; used after recovery when every entry
    /// already lives in the flashlog.
    void reset_next_lsn(std::uint64_t lsn);

    [[nodiscard]] bool empty() const { return live_.empty(); }
    [[nodiscard]] std::size_t size() const { return live_.size(); }
    [[nodiscard]] std::uint64_t head_lsn() const;
    [[nodiscard]] std::uint64_t tail_lsn() const;
    [[nodiscard]] std::uint64_t next_lsn() const { return next_lsn_; }
    [[nodiscard]] bool contains(std::uint64_t lsn) const;
    [[nodiscard]] NvmEntry entry(std::uint64_t lsn) const;
    [[nodiscard]] std::vector<NvmEntry> entries() const;

    [[nodiscard]] RaftMeta load_meta() const { return meta_; }
    void store_meta(const RaftMeta& meta);

    [[nodiscard]] std::uint32_t ring_capacity() const { return ring_capacity_; }
    [[nodiscard]] std::uint32_t max_entry() const { return max_entry_; }
    [[nodiscard]] std::uint64_t arena_offset() const { return arena_offset_; }
    [[nodiscard]] std::uint64_t arena_size() const;
    [[nodiscard]] std::uint64_t free_bytes() const;
    /// Sum of rounded buffer sizes referenced by live slots.
    [[nodiscard]] std::uint64_t live_bytes() const;
    /// Free extents as (offset, length), for allocator audits.
    [[nodiscard]] std::vector<std::pair<std::uint64_t, std::uint64_t>> free_extents() const;
    [[nodiscard]] Medium& medium() { return *medium_; }

    struct PoolState;

private:
    struct Live {
        PointerSlot slot;
        std::shared_ptr<const PayloadBlock> block;
    };

    NvmRegion(std::shared_ptr<Medium> medium, const NvmConfig& config);
    void format();
    void recover();
    std::uint64_t slot_offset(std::uint64_t lsn) const;
    void write_slot(const PointerSlot& slot);
    void clear_slot(std::uint64_t lsn);
    std::shared_ptr<const PayloadBlock> make_block(std::uint64_t offset, std::uint32_t length);
    std::uint64_t append_impl(std::uint64_t term, std::uint64_t index, std::size_t length,
                              const std::function<void(std::uint64_t)>& write_payload);

    std::shared_ptr<Medium> medium_;
    std::shared_ptr<PoolState> pool_;
    std::uint32_t ring_capacity_ = 0;
    std::uint32_t max_entry_ = 0;
    std::uint64_t arena_offset_ = 0;
    std::deque<Live> live_;
    std::uint64_t next_lsn_ = 0;
    RaftMeta meta_;
    std::uint64_t meta_seq_ = 0;
};

std::uint64_t pool_round(std::uint64_t length);

}  // namespace cyclone
