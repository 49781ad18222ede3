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

#include "cyclone/nvm_log.hpp"

#include <algorithm>
#include <array>
#include <cstring>

namespace cyclone {

std::uint64_t pool_round(std::uint64_t length) {
    auto n = std::max<std::uint64_t>(length, 1);
    return (n + kPoolGranularity - 1) / kPoolGranularity * kPoolGranularity;
}

// ---------------------------------------------------------------------------
// PointerSlot

void PointerSlot::encode(std::byte* out) const {
    store_u64(out + 0, offset);
    store_u32(out + 8, length);
    store_u64(out + 12, lsn);
    store_u64(out + 20, term);
    store_u64(out + 28, index);
    store_u32(out + 36, seal);
}

PointerSlot PointerSlot::decode(const std::byte* in) {
    PointerSlot s;
    s.offset = load_u64(in + 0);
    s.length = load_u32(in + 8);
    s.lsn = load_u64(in + 12);
    s.term = load_u64(in + 20);
    s.index = load_u64(in + 28);
    s.seal = load_u32(in + 36);
    return s;
}

std::uint32_t PointerSlot::compute_seal() const {
    std::array<std::byte, kPointerSlotSize> buf{};
    PointerSlot copy = *this;
    copy.seal = 0;
    copy.encode(buf.data());
    // Salted so that an all-zero record never verifies.
    return crc32c(ByteSpan(buf.data(), 36), 0x5EA1u);
}

// ---------------------------------------------------------------------------
// Pool

struct NvmRegion::PoolState {
    std::mutex mu;
    std::map<std::uint64_t, std::uint64_t> free;  // offset -> length
    std::uint64_t free_bytes = 0;

    void release(std::uint64_t offset, std::uint64_t length) {
        std::lock_guard lock(mu);
        auto [it, inserted] = free.emplace(offset, length);
        if (!inserted) return;
        free_bytes += length;
        if (auto next = std::next(it); next != free.end() && it->first + it->second == next->first) {
            it->second += next->second;
            free.erase(next);
        }
        if (it != free.begin()) {
            auto prev = std::prev(it);
            if (prev->first + prev->second == it->first) {
                prev->second += it->second;
                free.erase(it);
            }
        }
    }

    std::optional<std::uint64_t> allocate(std::uint64_t length) {
        std::lock_guard lock(mu);
        for (auto it = free.begin(); it != free.end(); ++it) {
            if (it->second < length) continue;
            auto offset = it->first;
            auto rest = it->second - length;
            free.erase(it);
            if (rest > 0) free.emplace(offset + length, rest);
            free_bytes -= length;
            return offset;
        }
        return std::nullopt;
    }

    /// Carves a specific range out of the free map; false if any byte is taken.
    bool take(std::uint64_t offset, std::uint64_t length) {
        std::lock_guard lock(mu);
        auto it = free.upper_bound(offset);
        if (it == free.begin()) return false;
        --it;
        if (it->first + it->second < offset + length) return false;
        auto start = it->first;
        auto total = it->second;
        free.erase(it);
        if (offset > start) free.emplace(start, offset - start);
        if (start + total > offset + length) free.emplace(offset + length, start + total - offset - length);
        free_bytes -= length;
        return true;
    }
};

namespace {

class ArenaBlock final : public PayloadBlock {
public:
    ArenaBlock(std::shared_ptr<Medium> medium, std::weak_ptr<NvmRegion::PoolState> pool, std::uint64_t offset,
               std::uint32_t length)
        : medium_(std::move(medium)), pool_(std::move(pool)), offset_(offset), length_(length) {}

    ~ArenaBlock() override {
        if (auto pool = pool_.lock()) pool->release(offset_, pool_round(length_));
    }

    [[nodiscard]] ByteSpan bytes() const override { return ByteSpan(medium_->mapped() + offset_, length_); }

private:
    std::shared_ptr<Medium> medium_;
    std::weak_ptr<NvmRegion::PoolState> pool_;
    std::uint64_t offset_;
    std::uint32_t length_;
};

std::uint64_t ring_end(std::uint32_t ring_capacity) {
    return kNvmRingOffset + static_cast<std::uint64_t>(ring_capacity) * kPointerSlotSize;
}

std::uint64_t compute_arena_offset(std::uint32_t ring_capacity) {
    return (ring_end(ring_capacity) + kPoolGranularity - 1) / kPoolGranularity * kPoolGranularity;
}

}  // namespace

// ---------------------------------------------------------------------------
// NvmRegion

NvmRegion::NvmRegion(std::shared_ptr<Medium> medium, const NvmConfig& config)
    : medium_(std::move(medium)),
      pool_(std::make_shared<PoolState>()),
      ring_capacity_(config.ring_capacity),
      max_entry_(config.max_entry) {}

NvmRegion::~NvmRegion() = default;

std::unique_ptr<NvmRegion> NvmRegion::open(std::shared_ptr<Medium> medium, const NvmConfig& config) {
    if (!medium) fail(ErrorCode::ContractViolation, "null medium");
    if (config.ring_capacity == 0) fail(ErrorCode::ContractViolation, "ring capacity must be positive");
    if (medium->size() == 0) medium->resize(config.capacity);
    if (medium->size() != config.capacity) {
        fail(ErrorCode::OpenSizeMismatch, "region is " + std::to_string(medium->size()) + " bytes, expected " +
                                              std::to_string(config.capacity));
    }
    if (medium->mapped() == nullptr) fail(ErrorCode::ContractViolation, "NVM region needs a byte-addressable medium");
    std::unique_ptr<NvmRegion> region(new NvmRegion(std::move(medium), config));

    std::array<std::byte, kNvmHeaderSize> header{};
    region->medium_->read(0, header);
    bool blank = std::all_of(header.begin(), header.end(), [](std::byte b) { return b == std::byte{0}; });
    if (blank) {
        region->format();
    } else {
        ByteReader r(header);
        auto magic = r.u64();
        auto version = r.u32();
        auto ring_capacity = r.u32();
        auto arena_offset = r.u64();
        auto region_size = r.u64();
        auto max_entry = r.u32();
        auto seal = r.u32();
        if (magic != kNvmMagic) fail(ErrorCode::OpenCorrupt, "bad magic");
        if (version != kNvmVersion) fail(ErrorCode::OpenCorrupt, "unsupported version " + std::to_string(version));
        if (seal != crc32c(ByteSpan(header.data(), 36))) fail(ErrorCode::OpenCorrupt, "header seal mismatch");
        if (region_size != region->medium_->size()) fail(ErrorCode::OpenSizeMismatch, "header records a different size");
        if (ring_capacity == 0 || arena_offset != compute_arena_offset(ring_capacity) || arena_offset >= region_size) {
            fail(ErrorCode::OpenCorrupt, "inconsistent ring geometry");
        }
        region->ring_capacity_ = ring_capacity;
        region->max_entry_ = max_entry;
        region->arena_offset_ = arena_offset;
    }
    region->recover();
    return region;
}

std::unique_ptr<NvmRegion> NvmRegion::open_file(const std::filesystem::path& path, const NvmConfig& config) {
    return open(std::make_shared<MappedFileMedium>(path, config.capacity), config);
}

void NvmRegion::format() {
    arena_offset_ = compute_arena_offset(ring_capacity_);
    if (arena_offset_ + kPoolGranularity > medium_->size()) {
        fail(ErrorCode::ContractViolation, "region too small for ring of " + std::to_string(ring_capacity_));
    }
    ByteWriter w(kNvmHeaderSize);
    w.u64(kNvmMagic).u32(kNvmVersion).u32(ring_capacity_).u64(arena_offset_).u64(medium_->size()).u32(max_entry_);
    auto seal = crc32c(w.view());
    w.u32(seal);
    w.zeros(kNvmHeaderSize - w.size());
    medium_->write(0, w.view());
    medium_->persist(0, kNvmHeaderSize);
}

std::uint64_t NvmRegion::slot_offset(std::uint64_t lsn) const {
    return kNvmRingOffset + (lsn % ring_capacity_) * kPointerSlotSize;
}

void NvmRegion::write_slot(const PointerSlot& slot) {
    std::array<std::byte, kPointerSlotSize> buf{};
    slot.encode(buf.data());
    auto off = slot_offset(slot.lsn);
    medium_->write(off, buf);
    medium_->persist(off, kPointerSlotSize);
}

void NvmRegion::clear_slot(std::uint64_t lsn) {
    std::array<std::byte, kPointerSlotSize> zero{};
    auto off = slot_offset(lsn);
    medium_->write(off, zero);
    medium_->persist(off, kPointerSlotSize);
}

std::shared_ptr<const PayloadBlock> NvmRegion::make_block(std::uint64_t offset, std::uint32_t length) {
    return std::make_shared<ArenaBlock>(medium_, pool_, offset, length);
}

void NvmRegion::recover() {
    // Metadata: two ping-pong records, highest valid sequence wins.
    for (std::size_t i = 0; i < 2; ++i) {
        std::array<std::byte, kNvmMetaRecordSize> rec{};
        medium_->read(kNvmMetaOffset + i * kNvmMetaRecordSize, rec);
        auto seq = load_u64(rec.data() + 16);
        if (seq == 0 || load_u32(rec.data() + 24) != crc32c(ByteSpan(rec.data(), 24))) continue;
        if (seq > meta_seq_) {
            meta_seq_ = seq;
            meta_.term = load_u64(rec.data());
            auto voted = load_u64(rec.data() + 8);
            meta_.voted_for = voted == 0 ? std::nullopt : std::optional<std::uint32_t>(static_cast<std::uint32_t>(voted - 1));
        }
    }

    const auto size = medium_->size();
    pool_->release(arena_offset_, size - arena_offset_);

    Bytes ring(static_cast<std::size_t>(ring_capacity_) * kPointerSlotSize);
    medium_->read(kNvmRingOffset, ring);
    std::vector<PointerSlot> valid;
    for (std::uint32_t pos = 0; pos < ring_capacity_; ++pos) {
        auto s = PointerSlot::decode(ring.data() + static_cast<std::size_t>(pos) * kPointerSlotSize);
        if (!s.valid()) continue;
        bool in_arena = s.offset >= arena_offset_ && s.offset + pool_round(s.length) <= size;
        if (s.lsn % ring_capacity_ != pos || !in_arena || s.length > max_entry_) continue;
        valid.push_back(s);
    }
    std::sort(valid.begin(), valid.end(), [](const auto& a, const auto& b) { return a.lsn < b.lsn; });

    std::size_t run = 0;
    while (run < valid.size() && valid[run].lsn == valid.front().lsn + run) ++run;
    for (std::size_t i = 0; i < run; ++i) {
        const auto& s = valid[i];
        if (!pool_->take(s.offset, pool_round(s.length))) {
            fail(ErrorCode::OpenCorrupt, "overlapping payload buffers at lsn " + std::to_string(s.lsn));
        }
        live_.push_back({s, make_block(s.offset, s.length)});
    }
    // Anything sealed but detached from the run is garbage from an interrupted truncation.
    for (std::size_t i = run; i < valid.size(); ++i) clear_slot(valid[i].lsn);
    next_lsn_ = live_.empty() ? 0 : live_.back().slot.lsn + 1;
}

std::uint64_t NvmRegion::append_impl(std::uint64_t term, std::uint64_t index, std::size_t length,
                                     const std::function<void(std::uint64_t)>& write_payload) {
    if (length > max_entry_) {
        fail(ErrorCode::EntryTooLarge, std::to_string(length) + " > " + std::to_string(max_entry_));
    }
    if (live_.size() >= ring_capacity_) fail(ErrorCode::LogFull, "pointer ring full");
    auto offset = pool_->allocate(pool_round(length));
    if (!offset) fail(ErrorCode::LogFull, "payload arena exhausted");

    write_payload(*offset);
    medium_->persist(*offset, length);

    PointerSlot slot;
    slot.offset = *offset;
    slot.length = static_cast<std::uint32_t>(length);
    slot.lsn = next_lsn_;
    slot.term = term;
    slot.index = index;
    slot.seal = slot.compute_seal();
    write_slot(slot);

    live_.push_back({slot, make_block(slot.offset, slot.length)});
    return next_lsn_++;
}

std::uint64_t NvmRegion::append(std::uint64_t term, std::uint64_t index, ByteSpan payload) {
    return append_impl(term, index, payload.size(), [&](std::uint64_t off) {
        if (!payload.empty()) medium_->write(off, payload);
    });
}

std::uint64_t NvmRegion::append(std::uint64_t term, std::uint64_t index, const PayloadChain& payload) {
    return append_impl(term, index, chain_size(payload), [&](std::uint64_t off) {
        for (const auto& part : payload) {
            if (part.empty()) continue;
            medium_->write(off, part.bytes());
            off += part.size();
        }
    });
}

std::uint64_t NvmRegion::truncate_front(std::uint64_t upto_lsn) {
    if (upto_lsn == kNoLsn || live_.empty() || upto_lsn < head_lsn()) return 0;
    if (upto_lsn > tail_lsn()) {
        fail(ErrorCode::TruncateBeyondTail, std::to_string(upto_lsn) + " > tail " + std::to_string(tail_lsn()));
    }
    std::uint64_t removed = 0;
    while (!live_.empty() && live_.front().slot.lsn <= upto_lsn) {
        clear_slot(live_.front().slot.lsn);
        live_.pop_front();
        ++removed;
    }
    return removed;
}

std::uint64_t NvmRegion::truncate_back(std::uint64_t from_index) {
    if (live_.empty() || from_index > live_.back().slot.index) return 0;
    if (from_index < live_.front().slot.index) {
        fail(ErrorCode::TruncateBeforeHead, std::to_string(from_index) + " < head index " +
                                                std::to_string(live_.front().slot.index));
    }
    std::uint64_t removed = 0;
    while (!live_.empty() && live_.back().slot.index >= from_index) {
        clear_slot(live_.back().slot.lsn);
        live_.pop_back();
        ++removed;
    }
    next_lsn_ -= removed;
    return removed;
}

void NvmRegion::reset_next_lsn(std::uint64_t lsn) {
    if (!live_.empty()) fail(ErrorCode::ContractViolation, "reset_next_lsn on a non-empty ring");
    next_lsn_ = lsn;
}

std::uint64_t NvmRegion::head_lsn() const {
    if (live_.empty()) fail(ErrorCode::ContractViolation, "empty ring has no head");
    return live_.front().slot.lsn;
}

std::uint64_t NvmRegion::tail_lsn() const {
    if (live_.empty()) fail(ErrorCode::ContractViolation, "empty ring has no tail");
    return live_.back().slot.lsn;
}

bool NvmRegion::contains(std::uint64_t lsn) const {
    return !live_.empty() && lsn >= live_.front().slot.lsn && lsn <= live_.back().slot.lsn;
}

NvmEntry NvmRegion::entry(std::uint64_t lsn) const {
    if (!contains(lsn)) fail(ErrorCode::ContractViolation, "lsn " + std::to_string(lsn) + " not in NVM ring");
    const auto& l = live_[lsn - live_.front().slot.lsn];
    return {l.slot.lsn, l.slot.term, l.slot.index, PayloadHandle(l.block, 0, l.slot.length)};
}

std::vector<NvmEntry> NvmRegion::entries() const {
    std::vector<NvmEntry> out;
    out.reserve(live_.size());
    for (const auto& l : live_) {
        out.push_back({l.slot.lsn, l.slot.term, l.slot.index, PayloadHandle(l.block, 0, l.slot.length)});
    }
    return out;
}

void NvmRegion::store_meta(const RaftMeta& meta) {
    auto seq = meta_seq_ + 1;
    std::array<std::byte, kNvmMetaRecordSize> rec{};
    store_u64(rec.data(), meta.term);
    store_u64(rec.data() + 8, meta.voted_for ? static_cast<std::uint64_t>(*meta.voted_for) + 1 : 0);
    store_u64(rec.data() + 16, seq);
    store_u32(rec.data() + 24, crc32c(ByteSpan(rec.data(), 24)));
    auto off = kNvmMetaOffset + (seq % 2) * kNvmMetaRecordSize;
    medium_->write(off, rec);
    medium_->persist(off, kNvmMetaRecordSize);
    meta_ = meta;
    meta_seq_ = seq;
}

std::uint64_t NvmRegion::arena_size() const { return medium_->size() - arena_offset_; }

std::uint64_t NvmRegion::free_bytes() const {
    std::lock_guard lock(pool_->mu);
    return pool_->free_bytes;
}

std::uint64_t NvmRegion::live_bytes() const {
    std::uint64_t n = 0;
    for (const auto& l : live_) n += pool_round(l.slot.length);
    return n;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> NvmRegion::free_extents() const {
    std::lock_guard lock(pool_->mu);
    return {pool_->free.begin(), pool_->free.end()};
}

}  // namespace cyclone
