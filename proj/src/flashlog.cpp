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

#include "cyclone/flashlog.hpp"

#include <algorithm>
#include <array>
#include <cstring>

namespace cyclone {

namespace {

constexpr std::size_t kPagesPerSegment = kFlashSegmentSize / kFlashPageSize;
constexpr std::size_t kSuperblockSealed = 32;

std::uint64_t page_floor(std::uint64_t v) { return v / kFlashPageSize * kFlashPageSize; }
std::uint64_t page_ceil(std::uint64_t v) { return (v + kFlashPageSize - 1) / kFlashPageSize * kFlashPageSize; }

bool all_zero(ByteSpan b) {
    return std::all_of(b.begin(), b.end(), [](std::byte x) { return x == std::byte{0}; });
}

struct ScannedRecord {
    std::uint64_t lsn = 0;
    std::uint64_t offset = 0;  // first fragment header
    Bytes payload;
};

struct ScanResult {
    std::vector<ScannedRecord> records;
    std::uint64_t fragments = 0;
    bool corrupt = false;
    bool tail_broken = false;
    std::uint64_t broken_offset = 0;
    std::uint64_t next_segment = 0;  // where new data may start
    std::vector<std::string> findings;
    std::vector<std::string> dump;
};

std::string hex(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

/**
 * Walks segments from `start`. Inside a segment, pages are parsed until a zero
 * header with room to spare or an all-zero page ends that segment's data; an
 * all-zero first page ends the log.
 */
ScanResult scan_image(const Medium& medium, std::uint64_t start, bool with_dump) {
    ScanResult out;
    out.next_segment = start;
    const auto size = medium.size();
    std::optional<ScannedRecord> pending;
    bool pending_at_segment_end = false;
    Bytes page(kFlashPageSize);

    auto flag = [&](const std::string& what) {
        out.corrupt = true;
        out.findings.push_back(what);
    };

    for (std::uint64_t seg = start; seg + kFlashPageSize <= size && !out.corrupt; seg += kFlashSegmentSize) {
        bool segment_has_data = false;
        for (std::size_t p = 0; p < kPagesPerSegment && !out.corrupt; ++p) {
            auto page_off = seg + p * kFlashPageSize;
            if (page_off + kFlashPageSize > size) break;
            medium.read(page_off, page);
            if (all_zero(page)) break;
            if (!segment_has_data && pending_at_segment_end) {
                flag("broken continuation chain for lsn " + std::to_string(pending->lsn) + " before segment " +
                     hex(seg));
                break;
            }
            segment_has_data = true;
            std::size_t o = 0;
            bool segment_done = false;
            while (o + kFlashRecordHeaderSize <= kFlashPageSize) {
                auto word = load_u32(page.data() + o);
                if (word == 0) {
                    if (!all_zero(ByteSpan(page).subspan(o))) {
                        flag("garbage after page-end marker at " + hex(page_off + o));
                    }
                    segment_done = kFlashPageSize - o > kFlashRecordHeaderSize;
                    break;
                }
                std::uint32_t frag = word & ~kContinuationBit;
                bool cont = (word & kContinuationBit) != 0;
                auto lsn = load_u64(page.data() + o + 4);
                if (frag == 0 || o + kFlashRecordHeaderSize + frag > kFlashPageSize) {
                    flag("fragment at " + hex(page_off + o) + " of " + std::to_string(frag) +
                         " bytes crosses a 4096-byte boundary");
                    break;
                }
                ++out.fragments;
                if (with_dump) {
                    out.dump.push_back(hex(page_off + o) + " lsn=" + std::to_string(lsn) +
                                       " size=" + std::to_string(frag) + (cont ? " cont" : ""));
                }
                if (pending && pending->lsn != lsn) {
                    flag("broken continuation chain at " + hex(page_off + o) + ": expected lsn " +
                         std::to_string(pending->lsn) + ", found " + std::to_string(lsn));
                    break;
                }
                if (!pending) pending = ScannedRecord{lsn, page_off + o, {}};
                auto body = ByteSpan(page).subspan(o + kFlashRecordHeaderSize, frag);
                pending->payload.insert(pending->payload.end(), body.begin(), body.end());
                o += kFlashRecordHeaderSize + frag;
                if (!cont) {
                    if (!out.records.empty() && pending->lsn != out.records.back().lsn + 1) {
                        flag("lsn " + std::to_string(pending->lsn) + " follows " +
                             std::to_string(out.records.back().lsn));
                        break;
                    }
                    if (pending->payload.size() < kFlashRecordPrefix) {
                        flag("record at " + hex(pending->offset) + " shorter than its prefix");
                        break;
                    }
                    out.records.push_back(std::move(*pending));
                    pending.reset();
                } else if (o != kFlashPageSize) {
                    flag("continued fragment at " + hex(page_off + o) + " does not end its page");
                    break;
                }
            }
            if (segment_done) break;
        }
        if (!segment_has_data) break;
        out.next_segment = seg + kFlashSegmentSize;
        pending_at_segment_end = pending.has_value();
    }
    if (pending && !out.corrupt) {
        out.tail_broken = true;
        out.broken_offset = pending->offset;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Placement

std::vector<Placement> plan_placement(std::size_t fill, std::size_t payload_size, std::size_t segment_size) {
    if (payload_size == 0) fail(ErrorCode::ContractViolation, "empty flashlog record");
    std::vector<Placement> out;
    auto pos = fill;
    auto remaining = payload_size;
    while (remaining > 0) {
        if (pos >= segment_size) {
            fail(ErrorCode::SegmentFull, std::to_string(payload_size) + " bytes do not fit after " + std::to_string(fill));
        }
        auto room = kFlashPageSize - pos % kFlashPageSize;
        if (room < kFlashRecordHeaderSize + 1) {
            pos += room;
            continue;
        }
        auto frag = std::min(remaining, room - kFlashRecordHeaderSize);
        remaining -= frag;
        out.push_back({static_cast<std::uint32_t>(pos), static_cast<std::uint32_t>(frag), remaining > 0});
        pos += kFlashRecordHeaderSize + frag;
    }
    return out;
}

SegmentBuffer::SegmentBuffer() : bytes_(kFlashSegmentSize) {}

std::vector<Placement> SegmentBuffer::place(std::uint64_t lsn, std::span<const ByteSpan> parts) {
    std::size_t total = 0;
    for (auto p : parts) total += p.size();
    auto placements = plan_placement(fill_, total);

    std::size_t part = 0, part_off = 0;
    for (const auto& pl : placements) {
        auto* dst = bytes_.data() + pl.offset;
        store_u32(dst, pl.size | (pl.continuation ? kContinuationBit : 0));
        store_u64(dst + 4, lsn);
        dst += kFlashRecordHeaderSize;
        std::size_t need = pl.size;
        while (need > 0) {
            auto src = parts[part];
            auto n = std::min(need, src.size() - part_off);
            std::memcpy(dst, src.data() + part_off, n);
            dst += n;
            need -= n;
            part_off += n;
            if (part_off == src.size()) {
                ++part;
                part_off = 0;
            }
        }
        fill_ = pl.offset + kFlashRecordHeaderSize + pl.size;
    }
    return placements;
}

std::vector<Placement> SegmentBuffer::place(std::uint64_t lsn, ByteSpan payload) {
    std::array<ByteSpan, 1> parts{payload};
    return place(lsn, parts);
}

void SegmentBuffer::reset() {
    std::fill(bytes_.begin(), bytes_.end(), std::byte{0});
    fill_ = 0;
}

// ---------------------------------------------------------------------------
// Flashlog

Flashlog::Flashlog(std::shared_ptr<Medium> medium, const FlashConfig& config)
    : medium_(std::move(medium)), config_(config) {}

Flashlog::~Flashlog() {
    if (worker_.joinable()) {
        worker_.request_stop();
        cv_.notify_all();
        worker_.join();
    }
}

std::unique_ptr<Flashlog> Flashlog::open(std::shared_ptr<Medium> medium, const FlashConfig& config) {
    if (!medium) fail(ErrorCode::ContractViolation, "null medium");
    if (config.preallocate_chunk < kFlashSegmentSize || config.preallocate_chunk % kFlashSegmentSize != 0) {
        fail(ErrorCode::ContractViolation, "preallocation chunk must be a multiple of the segment size");
    }
    if (config.max_outstanding == 0 || config.max_outstanding > kFlashMaxOutstanding) {
        fail(ErrorCode::ContractViolation, "outstanding submissions must be in [1, 32]");
    }
    std::unique_ptr<Flashlog> log(new Flashlog(std::move(medium), config));
    bool blank = log->medium_->size() < kFlashPageSize;
    if (!blank) {
        Bytes sb(kSuperblockSealed + 4);
        log->medium_->read(0, sb);
        blank = all_zero(sb);
    }
    if (blank) {
        log->format();
    } else {
        log->load_superblock();
    }
    log->scan();
    if (config.io == IoMode::Background) {
        log->worker_ = std::jthread([raw = log.get()](std::stop_token st) { raw->worker_loop(st); });
    }
    return log;
}

std::unique_ptr<Flashlog> Flashlog::open_file(const std::filesystem::path& path, const FlashConfig& config) {
    return open(std::make_shared<FileMedium>(path), config);
}

void Flashlog::format() {
    medium_->resize(kFlashDataOffset + config_.preallocate_chunk);
    medium_->persist(0, medium_->size());
    start_offset_ = kFlashDataOffset;
    low_water_lsn_ = kNoLsn;
    store_superblock();
}

void Flashlog::store_superblock() {
    ByteWriter w(kFlashPageSize);
    w.u64(kFlashMagic).u32(kFlashVersion).u32(kFlashSegmentSize).u64(start_offset_).u64(low_water_lsn_);
    w.u32(crc32c(w.view()));
    medium_->write(0, w.view());
    medium_->persist(0, kFlashPageSize);
}

void Flashlog::load_superblock() {
    Bytes sb(kSuperblockSealed + 4);
    medium_->read(0, sb);
    ByteReader r(sb);
    auto magic = r.u64();
    auto version = r.u32();
    auto segment = r.u32();
    auto start = r.u64();
    auto low = r.u64();
    auto seal = r.u32();
    if (magic != kFlashMagic) fail(ErrorCode::OpenCorrupt, "flashlog magic mismatch");
    if (version != kFlashVersion) fail(ErrorCode::OpenCorrupt, "unsupported flashlog version");
    if (seal != crc32c(ByteSpan(sb.data(), kSuperblockSealed))) fail(ErrorCode::OpenCorrupt, "superblock seal mismatch");
    if (segment != kFlashSegmentSize || start < kFlashDataOffset || (start - kFlashDataOffset) % kFlashSegmentSize != 0) {
        fail(ErrorCode::OpenCorrupt, "inconsistent segment geometry");
    }
    start_offset_ = start;
    low_water_lsn_ = low;
}

void Flashlog::scan() {
    auto result = scan_image(*medium_, start_offset_, false);
    if (result.corrupt) fail(ErrorCode::RecoverCorrupt, result.findings.front());
    if (result.tail_broken) {
        // Zero the incomplete record so it cannot later read as an interior break.
        auto end = std::min<std::uint64_t>(page_ceil(result.next_segment), medium_->size());
        Bytes zero(end - result.broken_offset);
        medium_->write(result.broken_offset, zero);
        medium_->persist(result.broken_offset, zero.size());
    }
    for (auto& rec : result.records) {
        FlashEntry e;
        e.lsn = rec.lsn;
        e.term = load_u64(rec.payload.data());
        e.index = load_u64(rec.payload.data() + 8);
        Bytes body(rec.payload.begin() + kFlashRecordPrefix, rec.payload.end());
        e.payload = PayloadHandle::adopt(std::move(body));
        if (index_first_ == kNoLsn) index_first_ = rec.lsn;
        index_.push_back(rec.offset);
        recovered_.push_back(std::move(e));
    }
    if (!recovered_.empty()) {
        appended_lsn_ = recovered_.back().lsn;
        durable_lsn_ = appended_lsn_;
    }
    segment_base_ = result.next_segment;
    if (result.tail_broken && (result.broken_offset - kFlashDataOffset) % kFlashSegmentSize == 0) {
        // The segment held nothing but the broken record; reuse it so the scan
        // does not stop at its now-empty first page.
        segment_base_ = result.broken_offset;
    }
    flushed_fill_ = 0;
}

bool Flashlog::append(std::uint64_t lsn, std::uint64_t term, std::uint64_t index, ByteSpan entry) {
    if (appended_lsn_ != kNoLsn && lsn != appended_lsn_ + 1) {
        fail(ErrorCode::ContractViolation,
             "flashlog append of lsn " + std::to_string(lsn) + " after " + std::to_string(appended_lsn_));
    }
    std::array<std::byte, kFlashRecordPrefix> prefix{};
    store_u64(prefix.data(), term);
    store_u64(prefix.data() + 8, index);
    std::array<ByteSpan, 2> parts{ByteSpan(prefix), entry};

    std::vector<Placement> placed;
    try {
        plan_placement(buffer_.fill(), kFlashRecordPrefix + entry.size());
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SegmentFull) throw;
        if (!can_submit()) return false;
        submit(true);
    }
    if (segment_base_ + kFlashSegmentSize > medium_->size()) {
        if (buffer_.fill() != 0) fail(ErrorCode::ContractViolation, "segment outside the preallocated region");
        preallocate_extend();
    }
    placed = buffer_.place(lsn, parts);
    if (index_first_ == kNoLsn) index_first_ = lsn;
    index_.push_back(segment_base_ + placed.front().offset);
    buffer_last_lsn_ = lsn;
    appended_lsn_ = lsn;
    return true;
}

bool Flashlog::flush() {
    if (!has_unflushed() || !can_submit()) return false;
    submit(false);
    return true;
}

void Flashlog::submit(bool sealing) {
    Submission s;
    auto from = page_floor(flushed_fill_);
    auto to = page_ceil(buffer_.fill());
    s.offset = segment_base_ + from;
    if (s.offset + (to - from) > medium_->size()) {
        fail(ErrorCode::ContractViolation, "write past the preallocated region");
    }
    auto src = buffer_.bytes().subspan(from, to - from);
    s.pages.assign(src.begin(), src.end());
    s.last_lsn = buffer_last_lsn_;
    if (sealing) {
        buffer_.reset();
        segment_base_ += kFlashSegmentSize;
        flushed_fill_ = 0;
    } else {
        flushed_fill_ = buffer_.fill();
    }
    {
        std::lock_guard lock(mu_);
        if (sealing) ++stats_.segments_sealed;
        ++stats_.submitted;
        ++in_flight_;
        stats_.max_outstanding_seen = std::max<std::uint64_t>(stats_.max_outstanding_seen, in_flight_);
        pending_.push_back(std::move(s));
    }
    cv_.notify_all();
}

void Flashlog::complete(Submission& s) {
    if (!s.pages.empty()) {
        medium_->write(s.offset, s.pages);
        medium_->persist(s.offset, s.pages.size());
    }
}

std::size_t Flashlog::run_io(std::size_t n) {
    std::size_t done = 0;
    if (config_.io == IoMode::Background) {
        std::unique_lock lock(mu_);
        auto target = stats_.completed + std::min<std::uint64_t>(n, in_flight_);
        auto start = stats_.completed;
        cv_.wait(lock, [&] { return stats_.completed >= target; });
        return static_cast<std::size_t>(stats_.completed - start);
    }
    while (done < n) {
        Submission s;
        {
            std::lock_guard lock(mu_);
            if (pending_.empty()) break;
            s = std::move(pending_.front());
            pending_.pop_front();
        }
        complete(s);
        std::lock_guard lock(mu_);
        --in_flight_;
        ++stats_.completed;
        if (s.last_lsn != kNoLsn) durable_lsn_ = s.last_lsn;
        ++done;
    }
    return done;
}

void Flashlog::worker_loop(std::stop_token stop) {
    for (;;) {
        Submission s;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, stop, [&] { return !pending_.empty(); });
            if (pending_.empty()) return;  // stop requested and nothing left
            s = std::move(pending_.front());
            pending_.pop_front();
        }
        complete(s);
        {
            std::lock_guard lock(mu_);
            --in_flight_;
            ++stats_.completed;
            if (s.last_lsn != kNoLsn) durable_lsn_ = s.last_lsn;
        }
        cv_.notify_all();
    }
}

std::size_t Flashlog::outstanding() const {
    std::lock_guard lock(mu_);
    return in_flight_;
}

std::uint64_t Flashlog::durable_lsn() const {
    std::lock_guard lock(mu_);
    return durable_lsn_;
}

FlashStats Flashlog::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

bool Flashlog::readable(std::uint64_t lsn) const {
    auto durable = durable_lsn();
    return index_first_ != kNoLsn && durable != kNoLsn && lsn >= index_first_ && lsn <= durable &&
           lsn - index_first_ < index_.size();
}

std::optional<FlashEntry> Flashlog::read(std::uint64_t lsn) const {
    if (!readable(lsn)) return std::nullopt;
    auto off = index_[lsn - index_first_];
    Bytes payload;
    std::array<std::byte, kFlashRecordHeaderSize> hdr{};
    for (;;) {
        medium_->read(off, hdr);
        auto word = load_u32(hdr.data());
        auto frag = word & ~kContinuationBit;
        if (load_u64(hdr.data() + 4) != lsn || frag == 0) {
            fail(ErrorCode::RecoverCorrupt, "flashlog index points at a foreign record");
        }
        auto at = payload.size();
        payload.resize(at + frag);
        medium_->read(off + kFlashRecordHeaderSize, std::span<std::byte>(payload.data() + at, frag));
        if ((word & kContinuationBit) == 0) break;
        off = page_ceil(off + kFlashRecordHeaderSize + frag);
    }
    FlashEntry e;
    e.lsn = lsn;
    e.term = load_u64(payload.data());
    e.index = load_u64(payload.data() + 8);
    e.payload = PayloadHandle::adopt(Bytes(payload.begin() + kFlashRecordPrefix, payload.end()));
    return e;
}

void Flashlog::truncate_upto(std::uint64_t upto_lsn) {
    auto durable = durable_lsn();
    if (durable == kNoLsn || upto_lsn > durable) {
        fail(ErrorCode::ContractViolation, "truncate_upto beyond the durable flashlog");
    }
    if (index_first_ == kNoLsn || upto_lsn < index_first_) return;
    std::uint64_t new_start;
    if (upto_lsn + 1 - index_first_ < index_.size()) {
        auto off = index_[upto_lsn + 1 - index_first_];
        new_start = kFlashDataOffset + (off - kFlashDataOffset) / kFlashSegmentSize * kFlashSegmentSize;
    } else {
        new_start = segment_base_;
    }
    if (new_start <= start_offset_) return;
    start_offset_ = new_start;
    low_water_lsn_ = upto_lsn;
    store_superblock();
    while (!index_.empty() && index_.front() < start_offset_) {
        index_.pop_front();
        ++index_first_;
    }
    if (index_.empty()) index_first_ = appended_lsn_ == kNoLsn ? kNoLsn : appended_lsn_ + 1;
}

std::uint64_t Flashlog::preallocate_extend() {
    auto target = medium_->size() + config_.preallocate_chunk;
    medium_->resize(target);
    medium_->persist(0, target);
    std::lock_guard lock(mu_);
    ++stats_.extends;
    return target;
}

// ---------------------------------------------------------------------------
// Drain and merge

DrainResult drain_step(NvmRegion& nvm, Flashlog& flog, std::uint64_t committed_lsn, std::size_t max_entries) {
    DrainResult r;
    auto durable = flog.durable_lsn();
    if (durable != kNoLsn && !nvm.empty() && durable >= nvm.head_lsn()) {
        r.truncated = nvm.truncate_front(std::min(durable, nvm.tail_lsn()));
    }
    if (committed_lsn != kNoLsn && !nvm.empty()) {
        auto next = flog.appended_lsn() == kNoLsn ? nvm.head_lsn() : flog.appended_lsn() + 1;
        while (r.count < max_entries && next <= committed_lsn && nvm.contains(next)) {
            auto e = nvm.entry(next);
            if (!flog.append(e.lsn, e.term, e.index, e.payload.bytes())) {
                r.stalled = true;
                break;
            }
            if (r.count == 0) r.first = next;
            r.last = next;
            ++r.count;
            ++next;
        }
    }
    if (r.count == 0 && !r.stalled && flog.has_unflushed()) {
        r.flushed = flog.flush();
        r.stalled = !r.flushed;
    }
    return r;
}

std::vector<FlashEntry> merge_recover(const NvmRegion& nvm, const std::vector<FlashEntry>& flash) {
    std::vector<FlashEntry> out = flash;
    for (const auto& e : nvm.entries()) {
        if (!out.empty() && e.lsn <= out.back().lsn) {
            if (e.lsn >= out.front().lsn) {
                const auto& f = out[e.lsn - out.front().lsn];
                if (f.term != e.term || f.index != e.index) {
                    fail(ErrorCode::RecoverInvariantViolation,
                         "lsn " + std::to_string(e.lsn) + " differs between NVM and flashlog");
                }
            }
            continue;
        }
        if (!out.empty() && e.lsn != out.back().lsn + 1) {
            fail(ErrorCode::RecoverInvariantViolation, "gap between flashlog lsn " + std::to_string(out.back().lsn) +
                                                           " and NVM lsn " + std::to_string(e.lsn));
        }
        out.push_back({e.lsn, e.term, e.index, e.payload});
    }
    return out;
}

FsckReport fsck_flashlog(const Medium& medium, bool with_dump) {
    FsckReport report;
    if (medium.size() < kFlashDataOffset) {
        report.ok = false;
        report.findings.push_back("file shorter than the superblock page");
        return report;
    }
    Bytes sb(kSuperblockSealed + 4);
    medium.read(0, sb);
    auto start = load_u64(sb.data() + 16);
    if (load_u64(sb.data()) != kFlashMagic) {
        report.ok = false;
        report.findings.push_back("superblock magic mismatch");
        return report;
    }
    if (load_u32(sb.data() + kSuperblockSealed) != crc32c(ByteSpan(sb.data(), kSuperblockSealed))) {
        report.ok = false;
        report.findings.push_back("superblock seal mismatch");
        return report;
    }
    if (load_u32(sb.data() + 12) != kFlashSegmentSize) {
        report.ok = false;
        report.findings.push_back("segment size is " + std::to_string(load_u32(sb.data() + 12)) + ", expected 131072");
        return report;
    }
    if (start < kFlashDataOffset || (start - kFlashDataOffset) % kFlashSegmentSize != 0) {
        report.ok = false;
        report.findings.push_back("start offset " + hex(start) + " is not segment aligned");
        return report;
    }
    auto scan = scan_image(medium, start, with_dump);
    report.records = scan.records.size();
    report.fragments = scan.fragments;
    if (!scan.records.empty()) {
        report.first_lsn = scan.records.front().lsn;
        report.last_lsn = scan.records.back().lsn;
    }
    report.tail_truncated = scan.tail_broken;
    report.findings = std::move(scan.findings);
    report.dump = std::move(scan.dump);
    report.ok = !scan.corrupt;
    return report;
}

}  // namespace cyclone
