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

#include "cyclone/common.hpp"

#include <array>
#include <cstring>

namespace cyclone {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OpenCorrupt: return "OpenCorrupt";
        case ErrorCode::OpenSizeMismatch: return "OpenSizeMismatch";
        case ErrorCode::LogFull: return "LogFull";
        case ErrorCode::EntryTooLarge: return "EntryTooLarge";
        case ErrorCode::TruncateBeyondTail: return "TruncateBeyondTail";
        case ErrorCode::TruncateBeforeHead: return "TruncateBeforeHead";
        case ErrorCode::SegmentFull: return "SegmentFull";
        case ErrorCode::RecoverCorrupt: return "RecoverCorrupt";
        case ErrorCode::RecoverInvariantViolation: return "RecoverInvariantViolation";
        case ErrorCode::ExtendFailed: return "ExtendFailed";
        case ErrorCode::ContractViolation: return "ContractViolation";
        case ErrorCode::SendTooLarge: return "SendTooLarge";
        case ErrorCode::DecodeError: return "DecodeError";
        case ErrorCode::BindFailed: return "BindFailed";
        case ErrorCode::Io: return "Io";
        case ErrorCode::ClusterUnavailable: return "ClusterUnavailable";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

Bytes to_bytes(std::string_view s) {
    Bytes out(s.size());
    if (!s.empty()) std::memcpy(out.data(), s.data(), s.size());
    return out;
}

std::string to_string(ByteSpan bytes) {
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

ByteWriter& ByteWriter::u8(std::uint8_t v) {
    buf_.push_back(std::byte{v});
    return *this;
}

ByteWriter& ByteWriter::u16(std::uint16_t v) {
    buf_.push_back(std::byte(v & 0xff));
    buf_.push_back(std::byte(v >> 8));
    return *this;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(std::byte((v >> (8 * i)) & 0xff));
    return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(std::byte((v >> (8 * i)) & 0xff));
    return *this;
}

ByteWriter& ByteWriter::bytes(ByteSpan b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
    return *this;
}

ByteWriter& ByteWriter::zeros(std::size_t n) {
    buf_.insert(buf_.end(), n, std::byte{0});
    return *this;
}

void ByteReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
        fail(ErrorCode::DecodeError, "short buffer: need " + std::to_string(n) + " have " +
                                         std::to_string(data_.size() - pos_));
    }
}

std::uint8_t ByteReader::u8() {
    need(1);
    return std::to_integer<std::uint8_t>(data_[pos_++]);
}

std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t v = std::to_integer<std::uint16_t>(data_[pos_]) |
                      static_cast<std::uint16_t>(std::to_integer<std::uint16_t>(data_[pos_ + 1]) << 8);
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    auto v = load_u32(data_.data() + pos_);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    auto v = load_u64(data_.data() + pos_);
    pos_ += 8;
    return v;
}

ByteSpan ByteReader::bytes(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

void store_u32(std::byte* dst, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) dst[i] = std::byte((v >> (8 * i)) & 0xff);
}

void store_u64(std::byte* dst, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) dst[i] = std::byte((v >> (8 * i)) & 0xff);
}

std::uint32_t load_u32(const std::byte* src) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(src[i]);
    return v;
}

std::uint64_t load_u64(const std::byte* src) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint64_t>(src[i]);
    return v;
}

namespace {

constexpr std::array<std::uint32_t, 256> make_crc32c_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? (0x82F63B78u ^ (c >> 1)) : (c >> 1);
        table[i] = c;
    }
    return table;
}

constexpr auto kCrc32cTable = make_crc32c_table();

}  // namespace

std::uint32_t crc32c(ByteSpan data, std::uint32_t seed) {
    std::uint32_t c = ~seed;
    for (auto b : data) c = kCrc32cTable[(c ^ std::to_integer<std::uint32_t>(b)) & 0xff] ^ (c >> 8);
    return ~c;
}

std::uint64_t fnv1a64(ByteSpan data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (auto b : data) {
        h ^= std::to_integer<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(ByteSpan(reinterpret_cast<const std::byte*>(s.data()), s.size()));
}

}  // namespace cyclone
