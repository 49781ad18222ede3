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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cyclone/flashlog.hpp"
#include "cyclone/wire.hpp"

namespace cyclone {

inline constexpr std::size_t kMaxKeyBytes = 4096;
inline constexpr std::size_t kMaxValueBytes = 1 << 20;
inline constexpr std::size_t kSnapshotRetention = 4;

struct KvResult {
    Status status = Status::Ok;
    std::string value;
};

/**
 * The replicated state machine. All calls serialize on one mutex, which is
 * the single synchronization point shared by every log instance of a node.
 * Snapshots are copy-on-write views.
 */
class KvStore {
public:
    using Map = std::map<std::string, std::string, std::less<>>;

    KvResult get(std::string_view key) const;
    KvResult put(std::string_view key, std::string_view value);
    KvResult del(std::string_view key);
    /// Get, Put, Delete or WeakGet.
    KvResult apply(const RequestView& req);
    /// Applies the write items of several logs as one step.
    void apply_items(const std::vector<RequestView::Item>& items);

    /// Captures the current state; keeps the newest kSnapshotRetention.
    std::uint64_t snapshot();
    [[nodiscard]] std::shared_ptr<const Map> snapshot_state(std::uint64_t id) const;
    [[nodiscard]] std::shared_ptr<const Map> state() const;

    [[nodiscard]] std::uint64_t state_hash() const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::uint64_t applied_ops() const;

    /// Test mode: records every update per key as "P:<value>" or "D".
    void enable_journal(bool on);
    [[nodiscard]] std::map<std::string, std::vector<std::string>> journal() const;

private:
    KvResult put_locked(std::string_view key, std::string_view value);
    KvResult del_locked(std::string_view key);
    Map& writable();

    mutable std::mutex mu_;
    std::shared_ptr<Map> state_ = std::make_shared<Map>();
    std::deque<std::pair<std::uint64_t, std::shared_ptr<const Map>>> snapshots_;
    std::uint64_t next_snapshot_ = 1;
    std::uint64_t applied_ = 0;
    bool journaling_ = false;
    std::map<std::string, std::vector<std::string>> journal_;
};

std::uint64_t state_hash(const KvStore::Map& m);

/// Replays a merged log (noop, batch and ganged bodies) up to committed_index.
/// `gang_applies` decides each ganged entry; by default every one applies.
void rebuild(KvStore& store, const std::vector<FlashEntry>& merged, std::uint64_t committed_index,
             std::uint16_t log_id = 0, const std::function<bool(const GangHeader&)>& gang_applies = {});

}  // namespace cyclone
