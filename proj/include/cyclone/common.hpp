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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cyclone {

using Bytes = std::vector<std::byte>;
using ByteSpan = std::span<const std::byte>;

/// Simulated or wall-clock time in nanoseconds.
using TimeNs = std::uint64_t;

inline constexpr TimeNs kMicros = 1000;
inline constexpr TimeNs kMillis = 1000 * kMicros;
inline constexpr TimeNs kSeconds = 1000 * kMillis;

enum class ErrorCode {
    OpenCorrupt,
    OpenSizeMismatch,
    LogFull,
    EntryTooLarge,
    TruncateBeyondTail,
    TruncateBeforeHead,
    SegmentFull,
    RecoverCorrupt,
    RecoverInvariantViolation,
    ExtendFailed,
    ContractViolation,
    SendTooLarge,
    DecodeError,
    BindFailed,
    Io,
    ClusterUnavailable,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

Bytes to_bytes(std::string_view s);
std::string to_string(ByteSpan bytes);

/// Little-endian appender.
class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

    ByteWriter& u8(std::uint8_t v);
    ByteWriter& u16(std::uint16_t v);
    ByteWriter& u32(std::uint32_t v);
    ByteWriter& u64(std::uint64_t v);
    ByteWriter& bytes(ByteSpan b);
    ByteWriter& zeros(std::size_t n);

    [[nodiscard]] std::size_t size() const { return buf_.size(); }
    [[nodiscard]] const Bytes& view() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Little-endian cursor; throws ErrorCode::DecodeError when the input is short.
class ByteReader {
public:
    explicit ByteReader(ByteSpan data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    ByteSpan bytes(std::size_t n);

    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] ByteSpan rest() const { return data_.subspan(pos_); }

private:
    void need(std::size_t n) const;

    ByteSpan data_;
    std::size_t pos_ = 0;
};

void store_u32(std::byte* dst, std::uint32_t v);
void store_u64(std::byte* dst, std::uint64_t v);
std::uint32_t load_u32(const std::byte* src);
std::uint64_t load_u64(const std::byte* src);

/// CRC-32C (Castagnoli), reflected, init/xorout 0xFFFFFFFF.
std::uint32_t crc32c(ByteSpan data, std::uint32_t seed = 0);

/// 64-bit FNV-1a. Used for key routing and state hashes.
std::uint64_t fnv1a64(ByteSpan data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace cyclone
