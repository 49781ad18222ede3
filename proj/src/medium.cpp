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

#include "cyclone/medium.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace cyclone {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
    fail(ErrorCode::Io, what + ": " + std::strerror(errno));
}

void check_range(std::uint64_t offset, std::uint64_t len, std::uint64_t size) {
    if (offset > size || len > size - offset) {
        fail(ErrorCode::ContractViolation, "medium access [" + std::to_string(offset) + ", +" +
                                               std::to_string(len) + ") beyond size " +
                                               std::to_string(size));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// MemoryMedium

MemoryMedium::MemoryMedium(std::uint64_t size) : bytes_(size) {}

MemoryMedium::MemoryMedium(Bytes image) : bytes_(std::move(image)) {}

std::uint64_t MemoryMedium::size() const {
    std::lock_guard lock(mu_);
    return bytes_.size();
}

void MemoryMedium::resize(std::uint64_t new_size) {
    std::lock_guard lock(mu_);
    bytes_.resize(new_size);
    if (journaling_) journal_.push_back({JournalOp::Kind::Resize, new_size, {}});
}

void MemoryMedium::write(std::uint64_t offset, ByteSpan data) {
    std::lock_guard lock(mu_);
    check_range(offset, data.size(), bytes_.size());
    std::memcpy(bytes_.data() + offset, data.data(), data.size());
    bytes_written_ += data.size();
    if (journaling_) journal_.push_back({JournalOp::Kind::Write, offset, Bytes(data.begin(), data.end())});
}

void MemoryMedium::read(std::uint64_t offset, std::span<std::byte> out) const {
    std::lock_guard lock(mu_);
    check_range(offset, out.size(), bytes_.size());
    std::memcpy(out.data(), bytes_.data() + offset, out.size());
}

void MemoryMedium::persist(std::uint64_t, std::uint64_t) {
    std::lock_guard lock(mu_);
    ++barriers_;
    if (journaling_) journal_.push_back({JournalOp::Kind::Barrier, 0, {}});
}

void MemoryMedium::start_journal() {
    std::lock_guard lock(mu_);
    journaling_ = true;
    base_ = bytes_;
    journal_.clear();
}

Bytes MemoryMedium::image_at(std::size_t ops, std::size_t torn) const {
    std::lock_guard lock(mu_);
    Bytes img = base_;
    auto apply = [&img](const JournalOp& op, std::size_t limit) {
        switch (op.kind) {
            case JournalOp::Kind::Write: {
                auto n = std::min(limit, op.data.size());
                std::memcpy(img.data() + op.offset, op.data.data(), n);
                break;
            }
            case JournalOp::Kind::Resize: img.resize(op.offset); break;
            case JournalOp::Kind::Barrier: break;
        }
    };
    for (std::size_t i = 0; i < ops && i < journal_.size(); ++i) apply(journal_[i], SIZE_MAX);
    if (ops < journal_.size() && torn > 0 && journal_[ops].kind == JournalOp::Kind::Write) {
        apply(journal_[ops], torn);
    }
    return img;
}

Bytes MemoryMedium::image() const {
    std::lock_guard lock(mu_);
    return bytes_;
}

// ---------------------------------------------------------------------------
// MappedFileMedium

MappedFileMedium::MappedFileMedium(const std::filesystem::path& path, std::uint64_t size) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) io_fail("open " + path.string());
    struct stat st {};
    if (::fstat(fd_, &st) != 0) io_fail("fstat " + path.string());
    if (st.st_size == 0) {
        if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) io_fail("ftruncate " + path.string());
        size_ = size;
    } else {
        size_ = static_cast<std::uint64_t>(st.st_size);
    }
    void* p = ::mmap(nullptr, size_, PROT_READ | PROT_WRITE, MAP_SHARED, fd_, 0);
    if (p == MAP_FAILED) io_fail("mmap " + path.string());
    base_ = static_cast<std::byte*>(p);
}

MappedFileMedium::~MappedFileMedium() {
    if (base_ != nullptr) ::munmap(base_, size_);
    if (fd_ >= 0) ::close(fd_);
}

void MappedFileMedium::resize(std::uint64_t) {
    fail(ErrorCode::ContractViolation, "mapped NVM regions have a fixed size");
}

void MappedFileMedium::write(std::uint64_t offset, ByteSpan data) {
    check_range(offset, data.size(), size_);
    std::memcpy(base_ + offset, data.data(), data.size());
    bytes_written_ += data.size();
}

void MappedFileMedium::read(std::uint64_t offset, std::span<std::byte> out) const {
    check_range(offset, out.size(), size_);
    std::memcpy(out.data(), base_ + offset, out.size());
}

void MappedFileMedium::persist(std::uint64_t offset, std::uint64_t length) {
    ++barriers_;
    if (length == 0) return;
    const auto page = static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE));
    const std::uint64_t begin = offset / page * page;
    const std::uint64_t end = std::min(size_, offset + length);
    if (::msync(base_ + begin, end - begin, MS_SYNC) != 0) io_fail("msync");
}

// ---------------------------------------------------------------------------
// FileMedium

FileMedium::FileMedium(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) io_fail("open " + path.string());
    struct stat st {};
    if (::fstat(fd_, &st) != 0) io_fail("fstat " + path.string());
    size_ = static_cast<std::uint64_t>(st.st_size);
}

FileMedium::~FileMedium() {
    if (fd_ >= 0) ::close(fd_);
}

std::uint64_t FileMedium::size() const {
    std::lock_guard lock(mu_);
    return size_;
}

void FileMedium::resize(std::uint64_t new_size) {
    std::lock_guard lock(mu_);
    if (new_size > size_) {
        int rc = ::posix_fallocate(fd_, static_cast<off_t>(size_), static_cast<off_t>(new_size - size_));
        if (rc != 0) {
            errno = rc;
            fail(ErrorCode::ExtendFailed, std::string("posix_fallocate: ") + std::strerror(rc));
        }
    } else if (::ftruncate(fd_, static_cast<off_t>(new_size)) != 0) {
        io_fail("ftruncate");
    }
    size_ = new_size;
}

void FileMedium::write(std::uint64_t offset, ByteSpan data) {
    {
        std::lock_guard lock(mu_);
        check_range(offset, data.size(), size_);
    }
    std::size_t done = 0;
    while (done < data.size()) {
        auto n = ::pwrite(fd_, data.data() + done, data.size() - done, static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("pwrite");
        }
        done += static_cast<std::size_t>(n);
    }
    bytes_written_ += data.size();
}

void FileMedium::read(std::uint64_t offset, std::span<std::byte> out) const {
    {
        std::lock_guard lock(mu_);
        check_range(offset, out.size(), size_);
    }
    std::size_t done = 0;
    while (done < out.size()) {
        auto n = ::pread(fd_, out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("pread");
        }
        if (n == 0) fail(ErrorCode::Io, "unexpected end of file");
        done += static_cast<std::size_t>(n);
    }
}

void FileMedium::persist(std::uint64_t, std::uint64_t) {
    ++barriers_;
    if (::fdatasync(fd_) != 0) io_fail("fdatasync");
}

}  // namespace cyclone
