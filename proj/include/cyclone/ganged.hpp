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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cyclone/payload.hpp"
#include "cyclone/wire.hpp"

namespace cyclone {

inline constexpr std::uint64_t kMachineIdMask = (1ULL << 48) - 1;

/**
 * Nonce = 48-bit machine id followed by a 64-bit tick count. Ticks come from
 * `clock` but are forced to increase strictly within one generator.
 */
class NonceGenerator {
public:
    NonceGenerator(std::uint64_t machine_id, std::function<std::uint64_t()> clock);
    /// Wall-clock anchored monotonic ticks in nanoseconds.
    static std::uint64_t wall_ticks();

    NonceBytes next();
    [[nodiscard]] std::uint64_t machine_id() const { return machine_; }

private:
    std::uint64_t machine_;
    std::function<std::uint64_t()> clock_;
    std::uint64_t last_ = 0;
};

NonceBytes make_nonce(std::uint64_t machine_id, std::uint64_t ticks);
std::uint64_t nonce_machine(const NonceBytes& n);
std::uint64_t nonce_ticks(const NonceBytes& n);
std::string nonce_hex(const NonceBytes& n);

enum class GangOutcome : std::uint8_t { Pending, Success, Failed };

/**
 * Barrier state of one replica, shared by all its log instances.
 *
 * A participant log p "arrives" when its apply loop reaches the gang entry.
 * It is resolved absent once its applied term passes the term stamped for it
 * without having arrived: a later leader can no longer commit the entry. Both
 * tests depend only on committed log contents, so every replica (and every
 * replay after a restart) decides each gang the same way.
 */
class BarrierTable {
public:
    struct Slot {
        GangHeader header;
        std::vector<bool> present;        // by position in header.view
        std::vector<PayloadHandle> bodies;  // entry bodies of present participants
        std::vector<bool> consumed;
        GangOutcome outcome = GangOutcome::Pending;
        bool executed = false;
        std::uint64_t snapshot_id = 0;
    };

    /// Records that `log` applied up to the gang entry. Idempotent.
    Slot& arrive(std::uint16_t log, const GangHeader& g, PayloadHandle body);
    /// Decides the slot if every participant is present or absent.
    GangOutcome try_resolve(Slot& s, const std::function<std::uint64_t(std::uint16_t)>& applied_term);
    /// `log` has moved past the entry. Frees the slot after the last present one.
    void consume(const NonceBytes& nonce, std::uint16_t log);

    Slot* find(const NonceBytes& nonce);
    /// Unresolved slots, for re-checking after any apply progress.
    std::vector<Slot*> pending();
    [[nodiscard]] std::size_t size() const { return slots_.size(); }
    void clear() { slots_.clear(); }

private:
    std::map<NonceBytes, Slot> slots_;
};

}  // namespace cyclone
