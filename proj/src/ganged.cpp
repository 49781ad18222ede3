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

#include "cyclone/ganged.hpp"

#include <chrono>
#include <cstdio>

namespace cyclone {

NonceGenerator::NonceGenerator(std::uint64_t machine_id, std::function<std::uint64_t()> clock)
    : machine_(machine_id & kMachineIdMask), clock_(std::move(clock)) {
    if (!clock_) clock_ = wall_ticks;
}

std::uint64_t NonceGenerator::wall_ticks() {
    using namespace std::chrono;
    static const auto anchor_wall = duration_cast<nanoseconds>(system_clock::now().time_since_epoch()).count();
    static const auto anchor_mono = steady_clock::now();
    auto since = duration_cast<nanoseconds>(steady_clock::now() - anchor_mono).count();
    return static_cast<std::uint64_t>(anchor_wall + since);
}

NonceBytes NonceGenerator::next() {
    auto t = clock_();
    if (t <= last_) t = last_ + 1;
    last_ = t;
    return make_nonce(machine_, t);
}

NonceBytes make_nonce(std::uint64_t machine_id, std::uint64_t ticks) {
    NonceBytes n{};
    for (int i = 0; i < 6; ++i) n[static_cast<std::size_t>(i)] = static_cast<std::byte>(machine_id >> (8 * (5 - i)));
    for (int i = 0; i < 8; ++i) n[static_cast<std::size_t>(6 + i)] = static_cast<std::byte>(ticks >> (8 * (7 - i)));
    return n;
}

std::uint64_t nonce_machine(const NonceBytes& n) {
    std::uint64_t v = 0;
    for (int i = 0; i < 6; ++i) v = (v << 8) | static_cast<std::uint64_t>(n[static_cast<std::size_t>(i)]);
    return v;
}

std::uint64_t nonce_ticks(const NonceBytes& n) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<std::uint64_t>(n[static_cast<std::size_t>(6 + i)]);
    return v;
}

std::string nonce_hex(const NonceBytes& n) {
    std::string s;
    char buf[3];
    for (auto b : n) {
        std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned>(b));
        s += buf;
    }
    return s;
}

BarrierTable::Slot& BarrierTable::arrive(std::uint16_t log, const GangHeader& g, PayloadHandle body) {
    auto [it, fresh] = slots_.try_emplace(g.nonce);
    auto& s = it->second;
    if (fresh) {
        s.header = g;
        s.present.assign(g.view.size(), false);
        s.consumed.assign(g.view.size(), false);
        s.bodies.resize(g.view.size());
    }
    for (std::size_t i = 0; i < s.header.view.size(); ++i) {
        if (s.header.view[i].first == log && !s.present[i]) {
            s.present[i] = true;
            s.bodies[i] = std::move(body);
            break;
        }
    }
    return s;
}

GangOutcome BarrierTable::try_resolve(Slot& s, const std::function<std::uint64_t(std::uint16_t)>& applied_term) {
    if (s.outcome != GangOutcome::Pending) return s.outcome;
    bool all = true;
    for (std::size_t i = 0; i < s.header.view.size(); ++i) {
        if (s.present[i]) continue;
        auto [log, term] = s.header.view[i];
        if (applied_term(log) <= term) return GangOutcome::Pending;
        all = false;
    }
    s.outcome = all ? GangOutcome::Success : GangOutcome::Failed;
    return s.outcome;
}

void BarrierTable::consume(const NonceBytes& nonce, std::uint16_t log) {
    auto it = slots_.find(nonce);
    if (it == slots_.end()) return;
    auto& s = it->second;
    bool done = true;
    for (std::size_t i = 0; i < s.header.view.size(); ++i) {
        if (s.header.view[i].first == log) s.consumed[i] = true;
        if (s.present[i] && !s.consumed[i]) done = false;
    }
    if (done && s.outcome != GangOutcome::Pending) slots_.erase(it);
}

BarrierTable::Slot* BarrierTable::find(const NonceBytes& nonce) {
    auto it = slots_.find(nonce);
    return it == slots_.end() ? nullptr : &it->second;
}

std::vector<BarrierTable::Slot*> BarrierTable::pending() {
    std::vector<Slot*> out;
    for (auto& [n, s] : slots_) {
        if (s.outcome == GangOutcome::Pending) out.push_back(&s);
    }
    return out;
}

}  // namespace cyclone
