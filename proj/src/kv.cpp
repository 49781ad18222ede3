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

#include "cyclone/kv.hpp"

namespace cyclone {

namespace {

std::string_view sv(ByteSpan b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

}  // namespace

KvStore::Map& KvStore::writable() {
    if (state_.use_count() > 1) state_ = std::make_shared<Map>(*state_);
    return *state_;
}

KvResult KvStore::get(std::string_view key) const {
    std::lock_guard lock(mu_);
    auto it = state_->find(key);
    if (it == state_->end()) return {Status::NotFound, {}};
    return {Status::Ok, it->second};
}

KvResult KvStore::put_locked(std::string_view key, std::string_view value) {
    if (key.size() > kMaxKeyBytes || value.size() > kMaxValueBytes) return {Status::TooLarge, {}};
    auto& m = writable();
    auto it = m.find(key);
    if (it == m.end()) {
        m.emplace(std::string(key), std::string(value));
    } else {
        it->second.assign(value);
    }
    ++applied_;
    if (journaling_) journal_[std::string(key)].push_back("P:" + std::string(value));
    return {Status::Ok, {}};
}

KvResult KvStore::del_locked(std::string_view key) {
    ++applied_;
    if (journaling_) journal_[std::string(key)].push_back("D");
    auto it = state_->find(key);
    if (it == state_->end()) return {Status::NotFound, {}};
    writable().erase(std::string(key));
    return {Status::Ok, {}};
}

KvResult KvStore::put(std::string_view key, std::string_view value) {
    std::lock_guard lock(mu_);
    return put_locked(key, value);
}

KvResult KvStore::del(std::string_view key) {
    std::lock_guard lock(mu_);
    return del_locked(key);
}

KvResult KvStore::apply(const RequestView& req) {
    switch (req.op) {
        case Op::Get:
        case Op::WeakGet: return get(sv(req.key));
        case Op::Put: return put(sv(req.key), sv(req.value));
        case Op::Delete: return del(sv(req.key));
        default: return {Status::BadRequest, {}};
    }
}

void KvStore::apply_items(const std::vector<RequestView::Item>& items) {
    std::lock_guard lock(mu_);
    for (const auto& it : items) {
        if (it.op == Op::Put) {
            put_locked(sv(it.key), sv(it.value));
        } else {
            del_locked(sv(it.key));
        }
    }
}

std::uint64_t KvStore::snapshot() {
    std::lock_guard lock(mu_);
    auto id = next_snapshot_++;
    snapshots_.emplace_back(id, state_);
    while (snapshots_.size() > kSnapshotRetention) snapshots_.pop_front();
    return id;
}

std::shared_ptr<const KvStore::Map> KvStore::snapshot_state(std::uint64_t id) const {
    std::lock_guard lock(mu_);
    for (const auto& [sid, m] : snapshots_) {
        if (sid == id) return m;
    }
    return nullptr;
}

std::shared_ptr<const KvStore::Map> KvStore::state() const {
    std::lock_guard lock(mu_);
    return state_;
}

std::uint64_t state_hash(const KvStore::Map& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : m) {
        std::uint64_t lens[2] = {k.size(), v.size()};
        h = fnv1a64(ByteSpan(reinterpret_cast<const std::byte*>(lens), sizeof lens), h);
        h = fnv1a64(ByteSpan(reinterpret_cast<const std::byte*>(k.data()), k.size()), h);
        h = fnv1a64(ByteSpan(reinterpret_cast<const std::byte*>(v.data()), v.size()), h);
    }
    return h;
}

std::uint64_t KvStore::state_hash() const { return cyclone::state_hash(*state()); }

std::size_t KvStore::size() const {
    std::lock_guard lock(mu_);
    return state_->size();
}

std::uint64_t KvStore::applied_ops() const {
    std::lock_guard lock(mu_);
    return applied_;
}

void KvStore::enable_journal(bool on) {
    std::lock_guard lock(mu_);
    journaling_ = on;
}

std::map<std::string, std::vector<std::string>> KvStore::journal() const {
    std::lock_guard lock(mu_);
    return journal_;
}

void rebuild(KvStore& store, const std::vector<FlashEntry>& merged, std::uint64_t committed_index,
             std::uint16_t log_id, const std::function<bool(const GangHeader&)>& gang_applies) {
    for (const auto& e : merged) {
        if (e.index > committed_index) break;
        auto entry = decode_entry(e.payload.bytes());
        if (entry.kind == EntryKind::Batch) {
            for (auto r : entry.requests) store.apply(decode_request(r));
        } else if (entry.kind == EntryKind::Ganged) {
            if (gang_applies && !gang_applies(entry.gang)) continue;
            auto req = decode_request(entry.gang_request);
            store.apply_items(req.items_for(log_id));
        }
    }
}

}  // namespace cyclone
