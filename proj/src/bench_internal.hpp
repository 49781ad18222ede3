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

#include <string>
#include <vector>

#include "cyclone/bench.hpp"

namespace cyclone::bench_detail {

enum class OpKind { Update = 0, Read = 1, WeakRead = 2 };

// Latency is measured at the client: from the first send to the accepted
// response, retries included.
struct Sample {
    OpKind kind;
    TimeNs start;
    TimeNs end;
    bool ok;
};

std::string make_key(std::uint64_t k, std::uint32_t size);
OpKind pick(const WorkloadMix& mix, Rng& rng);
void summarize(const std::vector<Sample>& samples, TimeNs from, TimeNs to, BenchReport& r);

BenchReport run_udp_once(const WorkloadSpec& spec, const BenchClusterConfig& bc);

}  // namespace cyclone::bench_detail
