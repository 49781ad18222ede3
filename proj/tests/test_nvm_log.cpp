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

#include <filesystem>
#include <random>
#include <tuple>

#include <gtest/gtest.h>

#include "cyclone/nvm_log.hpp"

using namespace cyclone;

namespace {

NvmConfig small_config() {
    NvmConfig c;
    c.capacity = 256 * 1024;
    c.ring_capacity = 64;
    c.max_entry = 9000;
    return c;
}

Bytes payload_of(std::uint64_t seed, std::size_t n) {
    Bytes b(n);
    std::mt19937_64 rng(seed);
    for (auto& x : b) x = static_cast<std::byte>(rng());
    return b;
}

using Tuple = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t, Bytes>;

std::vector<Tuple> dump(const NvmRegion& r) {
    std::vector<Tuple> out;
    for (const auto& e : r.entries()) {
        auto b = e.payload.bytes();
        out.emplace_back(e.lsn, e.term, e.index, Bytes(b.begin(), b.end()));
    }
    return out;
}

std::shared_ptr<MemoryMedium> reopen_image(Bytes image) { return std::make_shared<MemoryMedium>(std::move(image)); }

}  // namespace

TEST(NvmLog, FreshOpenIsEmpty) {
    auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), small_config());
    EXPECT_TRUE(region->empty());
    EXPECT_EQ(region->next_lsn(), 0u);
    EXPECT_EQ(region->free_bytes(), region->arena_size());
    EXPECT_EQ(region->arena_offset() % 64, 0u);
    EXPECT_GE(region->arena_offset(), kNvmRingOffset + 64 * kPointerSlotSize);
}

TEST(NvmLog, HeaderLayoutIsLittleEndian) {
    auto medium = std::make_shared<MemoryMedium>();
    auto region = NvmRegion::open(medium, small_config());
    auto img = medium->image();
    EXPECT_EQ(load_u64(img.data()), 0x4359434C4F4E4531ULL);
    EXPECT_EQ(load_u32(img.data() + 8), 1u);
    EXPECT_EQ(load_u32(img.data() + 12), 64u);
    EXPECT_EQ(load_u64(img.data() + 16), region->arena_offset());
    // "1ENOLCYC" on disk
    EXPECT_EQ(static_cast<char>(img[7]), 'C');
    EXPECT_EQ(static_cast<char>(img[0]), '1');
}

TEST(NvmLog, FirstAppendIsLsnZeroInSlotZero) {
    auto medium = std::make_shared<MemoryMedium>();
    auto region = NvmRegion::open(medium, small_config());
    auto p = to_bytes("hello");
    EXPECT_EQ(region->append(1, 1, p), 0u);
    auto img = medium->image();
    auto slot = PointerSlot::decode(img.data() + kNvmRingOffset);
    EXPECT_TRUE(slot.valid());
    EXPECT_EQ(slot.lsn, 0u);
    EXPECT_EQ(slot.length, 5u);
    EXPECT_EQ(slot.offset, region->arena_offset());
}

TEST(NvmLog, ThreeEntriesSurviveReopen) {
    auto medium = std::make_shared<MemoryMedium>();
    std::vector<Tuple> before;
    {
        auto region = NvmRegion::open(medium, small_config());
        for (std::uint64_t i = 0; i < 3; ++i) region->append(2, i + 1, payload_of(i, 100 + i));
        before = dump(*region);
    }
    auto region = NvmRegion::open(reopen_image(medium->image()), small_config());
    EXPECT_EQ(dump(*region), before);
    EXPECT_EQ(region->next_lsn(), 3u);
}

TEST(NvmLog, TornFinalSlotYieldsPrefix) {
    auto medium = std::make_shared<MemoryMedium>();
    auto region = NvmRegion::open(medium, small_config());
    region->append(1, 1, payload_of(1, 50));
    region->append(1, 2, payload_of(2, 70));
    medium->start_journal();
    region->append(1, 3, payload_of(3, 90));

    // Locate the write of the third slot record.
    std::size_t slot_op = SIZE_MAX;
    const auto& j = medium->journal();
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].kind == MemoryMedium::JournalOp::Kind::Write && j[i].offset == kNvmRingOffset + 2 * kPointerSlotSize) {
            slot_op = i;
        }
    }
    ASSERT_NE(slot_op, SIZE_MAX);
    for (std::size_t torn = 0; torn <= kPointerSlotSize; ++torn) {
        auto r = NvmRegion::open(reopen_image(medium->image_at(slot_op, torn)), small_config());
        auto expect = torn == kPointerSlotSize ? 3u : 2u;
        EXPECT_EQ(r->size(), expect) << "torn at " << torn;
        EXPECT_EQ(r->head_lsn(), 0u);
    }
}

TEST(NvmLog, RingFullRaisesLogFull) {
    auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), small_config());
    for (std::uint64_t i = 0; i < 64; ++i) region->append(1, i + 1, payload_of(i, 8));
    try {
        region->append(1, 65, payload_of(65, 8));
        FAIL() << "expected LogFull";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LogFull);
    }
}

TEST(NvmLog, ArenaExhaustionRaisesLogFull) {
    NvmConfig c = small_config();
    c.capacity = 64 * 1024;
    auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), c);
    auto arena = region->arena_size();
    std::uint64_t appended = 0;
    try {
        for (;;) {
            region->append(1, appended + 1, payload_of(appended, 9000));
            ++appended;
        }
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LogFull);
    }
    EXPECT_EQ(appended, arena / pool_round(9000));
}

TEST(NvmLog, EntryTooLarge) {
    auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), small_config());
    try {
        region->append(1, 1, Bytes(9001));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EntryTooLarge);
    }
}

TEST(NvmLog, ThousandAppendsMatchShadowLog) {
    NvmConfig c;
    c.capacity = 4 << 20;
    c.ring_capacity = 1024;
    auto medium = std::make_shared<MemoryMedium>();
    std::vector<Tuple> shadow;
    {
        auto region = NvmRegion::open(medium, c);
        std::mt19937_64 rng(7);
        std::uint64_t term = 1;
        for (std::uint64_t i = 0; i < 1000; ++i) {
            if (rng() % 50 == 0) ++term;
            auto p = payload_of(i, 1 + rng() % 2000);
            auto lsn = region->append(term, i + 1, p);
            shadow.emplace_back(lsn, term, i + 1, p);
        }
    }
    auto region = NvmRegion::open(reopen_image(medium->image()), c);
    EXPECT_EQ(dump(*region), shadow);
}

TEST(NvmLog, TruncateFrontCounts) {
    auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), small_config());
    EXPECT_EQ(region->truncate_front(kNoLsn), 0u);
    for (std::uint64_t i = 0; i < 5; ++i) region->append(1, i + 1, payload_of(i, 10));
    EXPECT_EQ(region->truncate_front(2), 3u);
    EXPECT_EQ(region->size(), 2u);
    EXPECT_EQ(region->head_lsn(), 3u);
    try {
        region->truncate_front(9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TruncateBeyondTail);
    }
}

TEST(NvmLog, TruncateBackRemovesSuffix) {
    auto medium = std::make_shared<MemoryMedium>();
    auto region = NvmRegion::open(medium, small_config());
    for (std::uint64_t i = 0; i < 6; ++i) region->append(1, i + 1, payload_of(i, 10));
    EXPECT_EQ(region->truncate_back(7), 0u);
    EXPECT_EQ(region->truncate_back(3), 4u);
    EXPECT_EQ(region->next_lsn(), 2u);
    EXPECT_EQ(region->append(2, 3, payload_of(99, 10)), 2u);
    region->truncate_front(1);
    try {
        region->truncate_back(1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TruncateBeforeHead);
    }
    auto r2 = NvmRegion::open(reopen_image(medium->image()), small_config());
    ASSERT_EQ(r2->size(), 1u);
    EXPECT_EQ(r2->entry(2).term, 2u);
}

TEST(NvmLog, BufferReclaimedOnlyAfterLastReference) {
    auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), small_config());
    auto full = region->free_bytes();
    region->append(1, 1, payload_of(1, 100));
    auto held = region->entry(0).payload;  // stands in for a queued packet
    EXPECT_EQ(held.use_count(), 2);
    region->truncate_front(0);
    EXPECT_TRUE(region->empty());
    EXPECT_EQ(region->free_bytes(), full - 128);
    EXPECT_EQ(held.bytes().size(), 100u);
    held = PayloadHandle();
    EXPECT_EQ(region->free_bytes(), full);
}

TEST(NvmLog, HandleOutlivesRegion) {
    PayloadHandle held;
    {
        auto region = NvmRegion::open(std::make_shared<MemoryMedium>(), small_config());
        region->append(1, 1, to_bytes("abc"));
        held = region->entry(0).payload;
    }
    EXPECT_EQ(to_string(held.bytes()), "abc");
}

TEST(NvmLog, AllocatorSoundnessAfterRecovery) {
    NvmConfig c = small_config();
    c.capacity = 48 * 1024;
    c.ring_capacity = 16;
    std::mt19937_64 rng(3);
    for (int round = 0; round < 200; ++round) {
        auto medium = std::make_shared<MemoryMedium>();
        auto region = NvmRegion::open(medium, c);
        std::uint64_t index = 1;
        for (int op = 0; op < 60; ++op) {
            auto k = rng() % 4;
            try {
                if (k < 2) {
                    region->append(1, index, payload_of(index, 1 + rng() % 3000));
                    ++index;
                } else if (k == 2 && !region->empty()) {
                    region->truncate_front(region->head_lsn() + rng() % region->size());
                } else if (!region->empty()) {
                    auto first = region->entry(region->head_lsn()).index;
                    auto from = first + rng() % region->size();
                    region->truncate_back(from);
                    index = from;
                }
            } catch (const Error& e) {
                ASSERT_EQ(e.code(), ErrorCode::LogFull);
            }
        }
        auto r2 = NvmRegion::open(reopen_image(medium->image()), c);
        EXPECT_EQ(r2->free_bytes() + r2->live_bytes(), r2->arena_size());
        // Exhaustive byte accounting: no overlap between free extents and live buffers.
        std::vector<int> owner(r2->arena_size(), 0);
        for (auto [off, len] : r2->free_extents()) {
            for (auto b = off; b < off + len; ++b) ++owner[b - r2->arena_offset()];
        }
        for (const auto& e : r2->entries()) {
            auto off = static_cast<std::uint64_t>(e.payload.bytes().data() - r2->medium().mapped());
            for (auto b = off; b < off + pool_round(e.payload.size()); ++b) ++owner[b - r2->arena_offset()];
        }
        for (auto v : owner) ASSERT_EQ(v, 1);
        EXPECT_EQ(dump(*r2), dump(*region));
    }
}

TEST(NvmLog, MetaPingPong) {
    auto medium = std::make_shared<MemoryMedium>();
    {
        auto region = NvmRegion::open(medium, small_config());
        region->store_meta({3, 1});
        region->store_meta({4, std::nullopt});
        region->store_meta({5, 2});
    }
    auto region = NvmRegion::open(reopen_image(medium->image()), small_config());
    EXPECT_EQ(region->load_meta().term, 5u);
    EXPECT_EQ(region->load_meta().voted_for, std::optional<std::uint32_t>(2));
}

TEST(NvmLog, CorruptHeaderAndSizeMismatch) {
    auto medium = std::make_shared<MemoryMedium>();
    NvmRegion::open(medium, small_config());
    auto img = medium->image();
    img[0] = std::byte{0x55};
    try {
        NvmRegion::open(reopen_image(img), small_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OpenCorrupt);
    }
    auto other = small_config();
    other.capacity *= 2;
    try {
        NvmRegion::open(reopen_image(medium->image()), other);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OpenSizeMismatch);
    }
}

TEST(NvmLog, MappedFileRoundTrip) {
    auto path = std::filesystem::temp_directory_path() / "cyclone_nvm_test.region";
    std::filesystem::remove(path);
    {
        auto region = NvmRegion::open_file(path, small_config());
        region->append(1, 1, to_bytes("persisted"));
    }
    {
        auto region = NvmRegion::open_file(path, small_config());
        ASSERT_EQ(region->size(), 1u);
        EXPECT_EQ(to_string(region->entry(0).payload.bytes()), "persisted");
    }
    std::filesystem::remove(path);
}
