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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cyclone/medium.hpp"
#include "cyclone/nvm_log.hpp"
#include "cyclone/payload.hpp"

namespace cyclone {

inline constexpr std::size_t kFlashPageSize = 4096;
inline constexpr std::size_t kFlashSegmentSize = 128 * 1024;
inline constexpr std::size_t kFlashRecordHeaderSize = 12;
inline constexpr std::size_t kFlashRecordPrefix = 16;  // term + index ahead of the entry bytes
inline constexpr std::uint32_t kContinuationBit = 1u << 31;
inline constexpr std::size_t kFlashMaxOutstanding = 32;
inline constexpr std::uint64_t kFlashMagic = 0x314853414C465943ULL;  // "CYFLASH1"
inline constexpr std::uint32_t kFlashVersion = 1;
inline constexpr std::uint64_t kFlashDataOffset = kFlashPageSize;  // page 0 is the superblock

struct Placement {
    std::uint32_t offset = 0;  // header offset within the segment
    std::uint32_t size = 0;    // fragment payload bytes
    bool continuation = false;

    bool operator==(const Placement&) const = default;
};

/// Lays out `payload_size` bytes starting at `fill` so that no header plus
/// fragment straddles a page. Throws SegmentFull if the record does not fit.
std::vector<Placement> plan_placement(std::size_t fill, std::size_t payload_size,
                                      std::size_t segment_size = kFlashSegmentSize);

/// One 128 KiB segment being filled.
class SegmentBuffer {
public:
    SegmentBuffer();

    /// segment_place: copies the record into the buffer. The parts are
    /// concatenated to form the record payload. On SegmentFull nothing changes.
    std::vector<Placement> place(std::uint64_t lsn, std::span<const ByteSpan> parts);
    std::vector<Placement> place(std::uint64_t lsn, ByteSpan payload);

    void reset();
    [[nodiscard]] std::size_t fill() const { return fill_; }
    [[nodiscard]] bool empty() const { return fill_ == 0; }
    [[nodiscard]] ByteSpan bytes() const { return bytes_; }

private:
    Bytes bytes_;
    std::size_t fill_ = 0;
};

enum class IoMode { Deferred, Background };

struct FlashConfig {
    std::uint64_t preallocate_chunk = 64ULL << 20;
    IoMode io = IoMode::Deferred;
    std::size_t max_outstanding = kFlashMaxOutstanding;
};

struct FlashEntry {
    std::uint64_t lsn = 0;
    std::uint64_t term = 0;
    std::uint64_t index = 0;
    PayloadHandle payload;
};

struct FlashStats {
    std::uint64_t submitted = 0;
    std::uint64_t completed = 0;
    std::uint64_t max_outstanding_seen = 0;
    std::uint64_t extends = 0;
    std::uint64_t segments_sealed = 0;
};

/**
 * Second-level log on block storage.
 *
 * Records are copied into the current segment buffer; full segments and, when
 * the drain goes idle, partially filled ones are submitted as page-aligned
 * writes. Completions are FIFO. In Deferred mode the owner completes writes by
 * calling run_io() (the simulator does this after a modeled latency); in
 * Background mode a worker thread performs them.
 */
class Flashlog {
public:
    static std::unique_ptr<Flashlog> open(std::shared_ptr<Medium> medium, const FlashConfig& config = {});
    static std::unique_ptr<Flashlog> open_file(const std::filesystem::path& path, const FlashConfig& config = {});

    ~Flashlog();
    Flashlog(const Flashlog&) = delete;
    Flashlog& operator=(const Flashlog&) = delete;

    /// Entries found by the scan at open, LSN ascending.
    [[nodiscard]] const std::vector<FlashEntry>& recovered() const { return recovered_; }

    [[nodiscard]] bool can_submit() const { return outstanding() < config_.max_outstanding; }
    /// Copies a record into the segment buffer, submitting the buffer first if
    /// it is full. Returns false (and does nothing) when a submission would be
    /// needed but the outstanding limit is reached.
    bool append(std::uint64_t lsn, std::uint64_t term, std::uint64_t index, ByteSpan entry);
    /// Submits unflushed bytes of the current segment. False if stalled or
    /// there is nothing to flush.
    bool flush();
    [[nodiscard]] bool has_unflushed() const { return buffer_.fill() > flushed_fill_; }

    /// Deferred mode: completes up to n oldest submissions. Background mode:
    /// waits for up to n completions.
    std::size_t run_io(std::size_t n = SIZE_MAX);
    [[nodiscard]] std::size_t outstanding() const;
    [[nodiscard]] std::uint64_t durable_lsn() const;
    [[nodiscard]] std::uint64_t appended_lsn() const { return appended_lsn_; }

    /// Reads a durable entry back. Used to serve followers whose next entry has
    /// already left the NVM ring.
    [[nodiscard]] std::optional<FlashEntry> read(std::uint64_t lsn) const;
    [[nodiscard]] bool readable(std::uint64_t lsn) const;
    [[nodiscard]] std::uint64_t first_lsn() const { return index_first_; }

    /// Maintenance: forget entries with lsn <= upto. Whole segments only.
    void truncate_upto(std::uint64_t upto_lsn);
    std::uint64_t preallocate_extend();
    [[nodiscard]] std::uint64_t preallocated_length() const { return medium_->size(); }
    [[nodiscard]] std::uint64_t start_offset() const { return start_offset_; }

    [[nodiscard]] FlashStats stats() const;
    [[nodiscard]] Medium& medium() { return *medium_; }

private:
    struct Submission {
        std::uint64_t offset = 0;
        Bytes pages;
        std::uint64_t last_lsn = kNoLsn;
    };

    Flashlog(std::shared_ptr<Medium> medium, const FlashConfig& config);
    void format();
    void load_superblock();
    void store_superblock();
    void scan();
    void submit(bool sealing);
    void complete(Submission& s);
    void worker_loop(std::stop_token stop);

    std::shared_ptr<Medium> medium_;
    FlashConfig config_;
    std::uint64_t start_offset_ = kFlashDataOffset;
    std::uint64_t low_water_lsn_ = kNoLsn;

    std::vector<FlashEntry> recovered_;
    // Offset of the first fragment for each lsn starting at index_first_.
    std::uint64_t index_first_ = kNoLsn;
    std::deque<std::uint64_t> index_;

    SegmentBuffer buffer_;
    std::uint64_t segment_base_ = 0;
    std::size_t flushed_fill_ = 0;
    std::uint64_t buffer_last_lsn_ = kNoLsn;
    std::uint64_t appended_lsn_ = kNoLsn;

    mutable std::mutex mu_;
    std::condition_variable_any cv_;
    std::deque<Submission> pending_;
    std::size_t in_flight_ = 0;  // pending plus the one the worker holds
    std::uint64_t durable_lsn_ = kNoLsn;
    FlashStats stats_;
    std::jthread worker_;
};

struct DrainResult {
    std::uint64_t first = kNoLsn;
    std::uint64_t last = kNoLsn;
    std::uint64_t count = 0;
    std::uint64_t truncated = 0;
    bool stalled = false;
    bool flushed = false;
};

/// Moves committed entries from the NVM head into the flashlog in LSN order and
/// trims the NVM ring up to what the flashlog has made durable.
DrainResult drain_step(NvmRegion& nvm, Flashlog& flog, std::uint64_t committed_lsn, std::size_t max_entries = 64);

/// Flash entries followed by NVM entries past the flash maximum, each LSN once.
std::vector<FlashEntry> merge_recover(const NvmRegion& nvm, const std::vector<FlashEntry>& flash);

struct FsckReport {
    bool ok = true;
    std::uint64_t records = 0;
    std::uint64_t fragments = 0;
    std::uint64_t first_lsn = kNoLsn;
    std::uint64_t last_lsn = kNoLsn;
    bool tail_truncated = false;
    std::vector<std::string> findings;
    std::vector<std::string> dump;
};

/// Read-only structural check of a flashlog image.
FsckReport fsck_flashlog(const Medium& medium, bool with_dump = false);

}  // namespace cyclone
