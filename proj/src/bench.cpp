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

#include "cyclone/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "bench_internal.hpp"
#include "cyclone/cluster.hpp"

namespace cyclone {

using nlohmann::json;

std::uint32_t SizeDist::sample(Rng& rng) const {
    double total = 0;
    for (const auto& b : buckets) total += b.second;
    double x = rng.unit() * total;
    for (const auto& b : buckets) {
        if (x < b.second) return b.first;
        x -= b.second;
    }
    return buckets.back().first;
}

double SizeDist::mean() const {
    double total = 0, sum = 0;
    for (const auto& b : buckets) {
        total += b.second;
        sum += b.second * b.first;
    }
    return total > 0 ? sum / total : 0;
}

double SizeDist::byte_share_below(std::uint32_t limit) const {
    double all = 0, small = 0;
    for (const auto& b : buckets) {
        all += b.second * b.first;
        if (b.first < limit) small += b.second * b.first;
    }
    return all > 0 ? small / all : 0;
}

void WorkloadSpec::validate() const {
    auto sum = mix.update_pct + mix.read_pct + mix.weak_read_pct;
    if (std::abs(sum - 100.0) > 1e-9) fail(ErrorCode::ContractViolation, "workload mix must sum to 100");
    if (mix.update_pct < 0 || mix.read_pct < 0 || mix.weak_read_pct < 0) {
        fail(ErrorCode::ContractViolation, "workload percentages must be non-negative");
    }
    if (keys == 0 || clients == 0 || duration <= 0) fail(ErrorCode::ContractViolation, "empty workload");
    if (value_size.buckets.empty()) fail(ErrorCode::ContractViolation, "value size distribution is empty");
}

WorkloadSpec preset(const std::string& name) {
    WorkloadSpec s;
    s.name = name;
    if (name == "update100") {
        s.value_size = SizeDist{{{8, 1.0}}};
    } else if (name == "update100-256") {
        s.value_size = SizeDist{{{256, 1.0}}};
    } else if (name == "readheavy95") {
        s.mix = {5, 95, 0};
        s.value_size = SizeDist{{{8, 1.0}}};
    } else if (name == "writeheavy80") {
        s.mix = {80, 20, 0};
        s.value_size = SizeDist{{{8, 1.0}}};
    } else if (name == "valuesize") {
        // Mostly small items; the rare large ones carry under 10% of the bytes.
        s.mix = {50, 40, 10};
        s.value_size = SizeDist{{{16, 0.35}, {64, 0.30}, {200, 0.20}, {450, 0.145}, {2000, 0.005}}};
    } else {
        fail(ErrorCode::ContractViolation, "unknown preset: " + name);
    }
    s.validate();
    return s;
}

std::vector<std::string> preset_names() { return {"update100", "update100-256", "readheavy95", "writeheavy80", "valuesize"}; }

LatencySummary LatencySummary::of(std::vector<TimeNs> v) {
    LatencySummary s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.count = v.size();
    auto us = [](TimeNs t) { return static_cast<double>(t) / 1000.0; };
    s.mean_us = us(std::accumulate(v.begin(), v.end(), TimeNs{0})) / static_cast<double>(v.size());
    auto pct = [&](double p) {
        auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - 1;
        return us(v[std::min(idx, v.size() - 1)]);
    };
    s.p50_us = pct(0.50);
    s.p99_us = pct(0.99);
    s.max_us = us(v.back());
    return s;
}

namespace {

json latency_json(const LatencySummary& l) {
    return {{"count", l.count}, {"mean_us", l.mean_us}, {"p50_us", l.p50_us}, {"p99_us", l.p99_us}, {"max_us", l.max_us}};
}

}  // namespace

std::string BenchReport::to_json() const {
    json j;
    j["preset"] = spec.name;
    j["workload"] = {{"update_pct", spec.mix.update_pct},
                     {"read_pct", spec.mix.read_pct},
                     {"weak_read_pct", spec.mix.weak_read_pct},
                     {"keys", spec.keys},
                     {"key_size", spec.key_size},
                     {"mean_value_size", spec.value_size.mean()},
                     {"clients", spec.clients},
                     {"warmup_ns", spec.warmup},
                     {"duration_ns", spec.duration},
                     {"label", "synthetic, paper-shaped"}};
    j["cluster"] = {{"transport", cluster.transport},
                    {"replicas", cluster.replicas},
                    {"logs", cluster.logs},
                    {"batching", cluster.batching},
                    {"seed", cluster.seed}};
    j["clock"] = clock;
    j["throughput_ops_per_s"] = throughput;
    j["latency"] = latency_json(latency);
    j["errors"] = errors;
    j["payload_copies"] = payload_copies;
    j["phases"] = json::array();
    for (const auto& p : phases) j["phases"].push_back({{"name", p.name}, {"latency", latency_json(p.latency)}});
    j["sweep"] = json::array();
    for (const auto& p : sweep) {
        j["sweep"].push_back({{"clients", p.clients}, {"throughput_ops_per_s", p.throughput}, {"latency", latency_json(p.latency)}});
    }
    return j.dump(2);
}

std::string BenchReport::to_csv() const {
    std::ostringstream o;
    o << "kind,name,clients,throughput_ops_per_s,count,mean_us,p50_us,p99_us,max_us\n";
    auto row = [&](const char* kind, const std::string& name, std::size_t clients, double tput, const LatencySummary& l) {
        o << kind << ',' << name << ',' << clients << ',' << tput << ',' << l.count << ',' << l.mean_us << ','
          << l.p50_us << ',' << l.p99_us << ',' << l.max_us << '\n';
    };
    row("total", spec.name, spec.clients, throughput, latency);
    for (const auto& p : phases) row("phase", p.name, spec.clients, 0, p.latency);
    for (const auto& p : sweep) row("sweep", spec.name, p.clients, p.throughput, p.latency);
    return o.str();
}

namespace bench_detail {

std::string make_key(std::uint64_t k, std::uint32_t size) {
    auto s = std::to_string(k);
    if (s.size() + 1 < size) s.insert(0, size - 1 - s.size(), '0');
    return "k" + s;
}

OpKind pick(const WorkloadMix& mix, Rng& rng) {
    double x = rng.unit() * 100;
    if (x < mix.update_pct) return OpKind::Update;
    if (x < mix.update_pct + mix.read_pct) return OpKind::Read;
    return OpKind::WeakRead;
}

void summarize(const std::vector<Sample>& samples, TimeNs from, TimeNs to, BenchReport& r) {
    std::vector<TimeNs> all;
    std::vector<TimeNs> by_kind[3];
    for (const auto& s : samples) {
        if (s.end < from || s.end >= to) continue;
        if (!s.ok) {
            ++r.errors;
            continue;
        }
        all.push_back(s.end - s.start);
        by_kind[static_cast<int>(s.kind)].push_back(s.end - s.start);
    }
    r.latency = LatencySummary::of(all);
    r.throughput = static_cast<double>(all.size()) / (static_cast<double>(to - from) / 1e9);
    static const char* names[] = {"update", "read", "weak_read"};
    r.phases.clear();
    for (int k = 0; k < 3; ++k) {
        if (!by_kind[k].empty()) r.phases.push_back({names[k], LatencySummary::of(by_kind[k])});
    }
}

}  // namespace bench_detail

namespace {

using bench_detail::OpKind;
using bench_detail::Sample;

BenchReport run_sim_once(const WorkloadSpec& spec, const BenchClusterConfig& bc) {
    auto copies0 = copy_counters().payload_copies.load();
    SimClusterConfig c;
    c.seed = bc.seed;
    c.replicas = bc.replicas;
    c.num_logs = bc.logs;
    c.batching = bc.batching;
    c.nvm = NvmConfig{16ULL << 20, 4096, 9000};
    c.flash_chunk = 4ULL << 20;
    SimCluster cl(c);
    // Leaders first, so the measured window starts from a steady group.
    TimeNs settle_until = 5 * kSeconds;
    while (cl.now() < settle_until) {
        cl.run_for(50 * kMillis);
        bool all = true;
        for (std::uint16_t l = 0; l < bc.logs; ++l) {
            auto li = cl.leader(l);
            if (!li || (bc.logs > 1 && !cl.node(*li).colocated())) all = false;
        }
        if (all) break;
    }
    if (!cl.leader(0)) fail(ErrorCode::ClusterUnavailable, "no leader elected");

    Rng rng(bc.seed * 0x2545F4914F6CDD1DULL + 1);
    std::vector<std::size_t> clients;
    for (std::size_t k = 0; k < spec.clients; ++k) {
        clients.push_back(cl.add_client([](ClientConfig& cc) { cc.timeout = 30 * kMillis; }));
    }
    std::vector<Sample> samples;
    auto t0 = cl.now();
    auto stop = t0 + spec.warmup + spec.duration;
    std::function<void(std::size_t)> issue = [&](std::size_t k) {
        if (cl.now() >= stop) return;
        auto kind = bench_detail::pick(spec.mix, rng);
        auto key = bench_detail::make_key(rng.below(spec.keys), spec.key_size);
        cl.with_client(clients[k], [&, k, kind, key](Client& client, TimeNs now) {
            auto done = [&, k, kind](const ClientResult& r) {
                samples.push_back({kind, r.start, r.end, r.status == Status::Ok || r.status == Status::NotFound});
                cl.loop().after(0, [&, k] { issue(k); });
            };
            switch (kind) {
                case OpKind::Update: client.put(key, std::string(spec.value_size.sample(rng), 'v'), now, done); break;
                case OpKind::Read: client.get(key, now, done); break;
                case OpKind::WeakRead: client.weak_get(key, now, done); break;
            }
        });
    };
    for (std::size_t k = 0; k < clients.size(); ++k) issue(k);
    cl.run_until(stop);

    BenchReport r;
    r.spec = spec;
    r.cluster = bc;
    r.clock = "sim";
    bench_detail::summarize(samples, t0 + spec.warmup, stop, r);
    r.payload_copies = copy_counters().payload_copies.load() - copies0;
    return r;
}

}  // namespace

BenchReport run_bench(const WorkloadSpec& spec, const BenchClusterConfig& bc) {
    spec.validate();
    if (bc.replicas == 0 || bc.logs == 0) fail(ErrorCode::ContractViolation, "cluster needs replicas and logs");
    auto once = [&](const WorkloadSpec& s) {
        if (bc.transport == "sim") return run_sim_once(s, bc);
        if (bc.transport == "udp") return bench_detail::run_udp_once(s, bc);
        fail(ErrorCode::ContractViolation, "unknown transport: " + bc.transport);
    };
    auto report = once(spec);
    for (auto n : bc.sweep) {
        auto s = spec;
        s.clients = n;
        auto r = once(s);
        report.sweep.push_back({n, r.throughput, r.latency});
    }
    return report;
}

std::string FailoverReport::to_json() const {
    json j;
    j["seed"] = config.seed;
    j["replicas"] = config.replicas;
    j["clients"] = config.clients;
    j["kill_at_ns"] = kill_at;
    j["gap_ns"] = gap;
    j["gap_ms"] = static_cast<double>(gap) / 1e6;
    j["victim"] = victim;
    j["new_leader"] = new_leader;
    j["killed_follower"] = config.kill_follower;
    j["converged"] = converged;
    j["bucket_ns"] = config.bucket;
    j["completions"] = completions;
    return j.dump(2);
}

FailoverReport run_failover(const FailoverConfig& fc) {
    SimClusterConfig c;
    c.seed = fc.seed;
    c.replicas = fc.replicas;
    c.nvm = NvmConfig{8ULL << 20, 2048, 9000};
    c.flash_chunk = 2ULL << 20;
    apply_failover_profile(c);
    SimCluster cl(c);

    Rng rng(fc.seed + 99);
    std::vector<std::size_t> clients;
    for (std::size_t k = 0; k < fc.clients; ++k) clients.push_back(cl.add_client());
    std::vector<TimeNs> done_at;
    auto stop = fc.kill_at + fc.observe;
    std::function<void(std::size_t)> issue = [&](std::size_t k) {
        if (cl.now() >= stop) return;
        auto key = bench_detail::make_key(rng.below(100000), 8);
        cl.with_client(clients[k], [&, k, key](Client& client, TimeNs now) {
            client.put(key, "v", now, [&, k](const ClientResult& r) {
                if (r.status == Status::Ok) done_at.push_back(r.end);
                cl.loop().after(0, [&, k] { issue(k); });
            });
        });
    };
    // Load starts once a leader exists.
    while (!cl.leader(0) && cl.now() < fc.kill_at) cl.run_for(5 * kMillis);
    for (std::size_t k = 0; k < clients.size(); ++k) issue(k);
    cl.run_until(fc.kill_at);

    FailoverReport r;
    r.config = fc;
    r.kill_at = cl.now();
    auto leader = cl.leader(0);
    if (!leader) fail(ErrorCode::ClusterUnavailable, "no leader at kill time");
    auto victim = fc.kill_follower ? (*leader + 1) % cl.size() : *leader;
    r.victim = SimCluster::node_id(victim);
    cl.kill(victim);
    cl.run_until(stop);
    if (auto nl = cl.leader(0)) r.new_leader = SimCluster::node_id(*nl);

    std::sort(done_at.begin(), done_at.end());
    // Responses already in flight at the kill can still land, so the gap is
    // the longest completion-free interval that ends after the kill.
    auto after = std::upper_bound(done_at.begin(), done_at.end(), r.kill_at);
    TimeNs prev = after == done_at.begin() ? 0 : *(after - 1);
    r.gap = 0;
    for (auto it = after; it != done_at.end(); ++it) {
        r.gap = std::max(r.gap, *it - prev);
        prev = *it;
    }
    r.gap = std::max(r.gap, stop - prev);
    r.completions.assign(static_cast<std::size_t>(stop / fc.bucket) + 1, 0);
    for (auto t : done_at) ++r.completions[static_cast<std::size_t>(t / fc.bucket)];

    if (fc.restart) {
        cl.restart(victim);
        r.converged = cl.run_until_quiescent(10 * kSeconds);
        auto h = cl.state_hashes();
        r.converged = r.converged && std::adjacent_find(h.begin(), h.end(), std::not_equal_to<>()) == h.end();
    }
    return r;
}

}  // namespace cyclone
