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

#include "support/crash_fuzz.hpp"

#include <algorithm>

#include "cyclone/sim.hpp"

namespace cyclone::testing {

namespace {

constexpr int kNvm = 0;
constexpr int kFlash = 1;

NvmConfig fuzz_nvm() { return NvmConfig{256 << 10, 64, 9000}; }

FlashConfig fuzz_flash() {
    FlashConfig c;
    c.preallocate_chunk = 256 << 10;
    c.io = IoMode::Deferred;
    return c;
}

Bytes random_payload(Rng& rng, std::uint64_t lsn) {
    auto n = 1 + rng.below(rng.chance(0.2) ? 9000 : 600);
    Bytes b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::byte>((lsn * 131 + i * 7) & 0xFF);
    return b;
}

bool same(ByteSpan a, const Bytes& b) { return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin()); }

}  // namespace

CrashFuzzResult run_crash_fuzz(std::uint64_t seed, std::size_t entries) {
    Rng rng(seed);
    std::vector<SequencedMedium::Stamp> timeline;
    auto nvm_mem = std::make_shared<MemoryMedium>();
    auto flash_mem = std::make_shared<MemoryMedium>();
    nvm_mem->start_journal();
    flash_mem->start_journal();
    auto nvm = NvmRegion::open(std::make_shared<SequencedMedium>(nvm_mem, kNvm, timeline), fuzz_nvm());
    auto flog = Flashlog::open(std::make_shared<SequencedMedium>(flash_mem, kFlash, timeline), fuzz_flash());
    const auto formatted = timeline.size();

    std::vector<Bytes> expected;
    std::vector<std::size_t> acked_after;  // timeline length when each append returned
    std::uint64_t committed = kNoLsn;
    auto pump = [&] {
        if (!expected.empty() && rng.chance(0.7)) {
            auto lag = rng.below(4);
            auto last = expected.size() - 1;
            auto c = last >= lag ? last - lag : kNoLsn;
            if (c != kNoLsn && (committed == kNoLsn || c > committed)) committed = c;
        }
        drain_step(*nvm, *flog, committed, 1 + rng.below(8));
        if (rng.chance(0.5)) flog->run_io();
    };
    while (expected.size() < entries) {
        auto lsn = expected.size();
        auto payload = random_payload(rng, lsn);
        try {
            nvm->append(1, lsn + 1, payload);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LogFull) throw;
            pump();
            flog->run_io();
            continue;
        }
        expected.push_back(std::move(payload));
        acked_after.push_back(timeline.size());
        if (rng.chance(0.6)) pump();
    }
    committed = expected.size() - 1;
    for (int k = 0; k < 1000 && (nvm->size() > 0 || flog->outstanding() > 0); ++k) {
        drain_step(*nvm, *flog, committed, 64);
        flog->run_io();
    }

    // ops[m][g] = journal length of medium m after the first g timeline events
    std::vector<std::size_t> ops[2];
    ops[0].assign(timeline.size() + 1, 0);
    ops[1].assign(timeline.size() + 1, 0);
    for (std::size_t g = 0; g < timeline.size(); ++g) {
        ops[0][g + 1] = ops[0][g];
        ops[1][g + 1] = ops[1][g];
        ops[timeline[g].medium][g + 1] = timeline[g].ops;
    }

    CrashFuzzResult out;
    auto check = [&](std::size_t events, std::size_t flash_ops, std::size_t torn, const char* what) {
        ++out.points;
        auto acked = static_cast<std::size_t>(
            std::upper_bound(acked_after.begin(), acked_after.end(), events) - acked_after.begin());
        std::string why;
        try {
            auto nv = NvmRegion::open(std::make_shared<MemoryMedium>(nvm_mem->image_at(ops[kNvm][events])), fuzz_nvm());
            auto fl = Flashlog::open(std::make_shared<MemoryMedium>(flash_mem->image_at(flash_ops, torn)), fuzz_flash());
            auto merged = merge_recover(*nv, fl->recovered());
            if (merged.size() < acked) why = "lost acknowledged entries";
            if (merged.size() > expected.size()) why = "recovered entries never appended";
            for (std::size_t i = 0; why.empty() && i < merged.size(); ++i) {
                if (merged[i].lsn != i) why = "lsn gap or duplicate at " + std::to_string(i);
                else if (!same(merged[i].payload.bytes(), expected[i])) why = "payload mismatch at lsn " + std::to_string(i);
            }
        } catch (const Error& e) {
            why = std::string("recovery threw: ") + e.what();
        }
        if (!why.empty()) {
            ++out.failures;
            if (out.details.size() < 8) {
                out.details.push_back(std::string(what) + " crash after event " + std::to_string(events) + ": " + why);
            }
        }
    };

    for (std::size_t g = formatted; g < timeline.size(); ++g) {
        const auto& st = timeline[g];
        const auto& journal = st.medium == kNvm ? nvm_mem->journal() : flash_mem->journal();
        const auto& op = journal[st.ops - 1];
        if (op.kind == MemoryMedium::JournalOp::Kind::Barrier) {
            ++out.barrier_points;
            check(g + 1, ops[kFlash][g + 1], 0, "barrier");
        } else if (st.medium == kFlash && op.kind == MemoryMedium::JournalOp::Kind::Write) {
            for (std::size_t t = 4096; t < op.data.size(); t += 4096) {
                ++out.page_points;
                check(g, st.ops - 1, t, "page");
            }
        }
    }
    return out;
}

}  // namespace cyclone::testing
