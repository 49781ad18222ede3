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
#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

#include "cyclone/common.hpp"

namespace cyclone {

/**
 * Persistent byte storage with an explicit ordering barrier.
 *
 * Writes become durable only once a persist() covering them returns. Writes
 * issued after a barrier are never durable before writes issued before it.
 * This stands in for cache-line flush + fence on byte-addressable NVM and for
 * fdatasync on block files.
 */
class Medium {
public:
    virtual ~Medium() = default;

    [[nodiscard]] virtual std::uint64_t size() const = 0;
    /// Grows (zero-filled) or shrinks the medium.
    virtual void resize(std::uint64_t new_size) = 0;
    virtual void write(std::uint64_t offset, ByteSpan data) = 0;
    virtual void read(std::uint64_t offset, std::span<std::byte> out) const = 0;
    virtual void persist(std::uint64_t offset, std::uint64_t length) = 0;

    /// Direct load/store view for byte-addressable media, nullptr otherwise.
    /// The pointer is invalidated by resize().
    virtual std::byte* mapped() { return nullptr; }

    [[nodiscard]] std::uint64_t barrier_count() const { return barriers_; }
    [[nodiscard]] std::uint64_t bytes_written() const { return bytes_written_; }

protected:
    std::atomic<std::uint64_t> barriers_{0};
    std::atomic<std::uint64_t> bytes_written_{0};
};

/**
 * Heap-backed medium used by the simulator and by crash-point tests.
 *
 * With the journal enabled every write, resize and barrier is recorded, and
 * image_at() reconstructs what a crash after any prefix of those operations
 * would leave behind, optionally with the next write torn after a given
 * number of bytes.
 */
class MemoryMedium final : public Medium {
public:
    struct JournalOp {
        enum class Kind { Write, Resize, Barrier } kind;
        std::uint64_t offset = 0;  // write offset or new size
        Bytes data;
    };

    explicit MemoryMedium(std::uint64_t size = 0);
    explicit MemoryMedium(Bytes image);

    [[nodiscard]] std::uint64_t size() const override;
    void resize(std::uint64_t new_size) override;
    void write(std::uint64_t offset, ByteSpan data) override;
    void read(std::uint64_t offset, std::span<std::byte> out) const override;
    void persist(std::uint64_t offset, std::uint64_t length) override;
    std::byte* mapped() override { return bytes_.data(); }

    void start_journal();
    [[nodiscard]] const std::vector<JournalOp>& journal() const { return journal_; }
    /// Image after the first `ops` journal entries, plus the first `torn`
    /// bytes of entry `ops` when that entry is a write.
    [[nodiscard]] Bytes image_at(std::size_t ops, std::size_t torn = 0) const;
    [[nodiscard]] Bytes image() const;

private:
    mutable std::mutex mu_;
    Bytes bytes_;
    bool journaling_ = false;
    Bytes base_;
    std::vector<JournalOp> journal_;
};

/// mmap-backed file, the byte-addressable stand-in for an NVDIMM region.
class MappedFileMedium final : public Medium {
public:
    /// Creates the file with `size` zero bytes when absent.
    MappedFileMedium(const std::filesystem::path& path, std::uint64_t size);
    ~MappedFileMedium() override;
    MappedFileMedium(const MappedFileMedium&) = delete;
    MappedFileMedium& operator=(const MappedFileMedium&) = delete;

    [[nodiscard]] std::uint64_t size() const override { return size_; }
    void resize(std::uint64_t new_size) override;
    void write(std::uint64_t offset, ByteSpan data) override;
    void read(std::uint64_t offset, std::span<std::byte> out) const override;
    void persist(std::uint64_t offset, std::uint64_t length) override;
    std::byte* mapped() override { return base_; }

private:
    int fd_ = -1;
    std::byte* base_ = nullptr;
    std::uint64_t size_ = 0;
};

/// Plain block file using pread/pwrite, posix_fallocate and fdatasync.
class FileMedium final : public Medium {
public:
    explicit FileMedium(const std::filesystem::path& path);
    ~FileMedium() override;
    FileMedium(const FileMedium&) = delete;
    FileMedium& operator=(const FileMedium&) = delete;

    [[nodiscard]] std::uint64_t size() const override;
    void resize(std::uint64_t new_size) override;
    void write(std::uint64_t offset, ByteSpan data) override;
    void read(std::uint64_t offset, std::span<std::byte> out) const override;
    void persist(std::uint64_t offset, std::uint64_t length) override;

private:
    int fd_ = -1;
    mutable std::mutex mu_;
    std::uint64_t size_ = 0;
};

}  // namespace cyclone
