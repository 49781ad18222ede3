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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cyclone/bench.hpp"
#include "cyclone/flashlog.hpp"
#include "cyclone/medium.hpp"
#include "cyclone/nvm_log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cyclone;

namespace {

struct BenchArgs {
    std::string preset = "update100";
    std::size_t replicas = 3;
    std::uint16_t logs = 1;
    std::string transport = "sim";
    std::uint64_t seed = 1;
    std::string out;
    bool no_batching = false;
    std::vector<std::size_t> sweep;
    std::size_t clients = 0;
    double duration_ms = 0;
    double warmup_ms = -1;
    std::uint64_t keys = 0;
    std::string host = "127.0.0.1";
};

struct FailoverArgs {
    std::uint64_t seed = 1;
    std::size_t seeds = 1;
    std::size_t replicas = 3;
    std::size_t clients = 8;
    bool kill_follower = false;
    std::string out;
};

// CYCLONE_CONFIG names a JSON file with optional "bench" and "failover"
// objects. Command-line flags override it.
void load_config(BenchArgs& b, FailoverArgs& f) {
    const char* path = std::getenv("CYCLONE_CONFIG");
    if (path == nullptr || *path == '\0') return;
    std::ifstream in(path);
    if (!in) throw std::runtime_error(std::string("cannot read CYCLONE_CONFIG file ") + path);
    auto j = json::parse(in);
    if (j.contains("bench")) {
        const auto& c = j["bench"];
        b.preset = c.value("preset", b.preset);
        b.replicas = c.value("replicas", b.replicas);
        b.logs = c.value("logs", b.logs);
        b.transport = c.value("transport", b.transport);
        b.seed = c.value("seed", b.seed);
        b.out = c.value("out", b.out);
        b.no_batching = !c.value("batching", !b.no_batching);
        b.sweep = c.value("sweep", b.sweep);
        b.clients = c.value("clients", b.clients);
        b.duration_ms = c.value("duration_ms", b.duration_ms);
        b.warmup_ms = c.value("warmup_ms", b.warmup_ms);
        b.keys = c.value("keys", b.keys);
        b.host = c.value("host", b.host);
    }
    if (j.contains("failover")) {
        const auto& c = j["failover"];
        f.seed = c.value("seed", f.seed);
        f.seeds = c.value("seeds", f.seeds);
        f.replicas = c.value("replicas", f.replicas);
        f.clients = c.value("clients", f.clients);
        f.kill_follower = c.value("kill_follower", f.kill_follower);
        f.out = c.value("out", f.out);
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

int cmd_bench(const BenchArgs& a) {
    auto spec = preset(a.preset);
    if (a.clients > 0) spec.clients = a.clients;
    if (a.duration_ms > 0) spec.duration = static_cast<TimeNs>(a.duration_ms * 1e6);
    if (a.warmup_ms >= 0) spec.warmup = static_cast<TimeNs>(a.warmup_ms * 1e6);
    if (a.keys > 0) spec.keys = a.keys;
    BenchClusterConfig bc;
    bc.transport = a.transport;
    bc.replicas = a.replicas;
    bc.logs = a.logs;
    bc.batching = !a.no_batching;
    bc.seed = a.seed;
    bc.sweep = a.sweep;
    bc.host = a.host;
    auto r = run_bench(spec, bc);
    std::printf("%s transport=%s replicas=%zu logs=%u batching=%s: %.0f ops/s, p50 %.1f us, p99 %.1f us, errors %llu (%s clock)\n",
                spec.name.c_str(), bc.transport.c_str(), bc.replicas, bc.logs, bc.batching ? "on" : "off", r.throughput,
                r.latency.p50_us, r.latency.p99_us, static_cast<unsigned long long>(r.errors), r.clock.c_str());
    for (const auto& p : r.sweep) {
        std::printf("  clients=%zu: %.0f ops/s, p50 %.1f us\n", p.clients, p.throughput, p.latency.p50_us);
    }
    if (!a.out.empty()) {
        fs::path out(a.out);
        write_file(out, r.to_json());
        auto csv = out;
        csv.replace_extension(".csv");
        write_file(csv, r.to_csv());
        std::printf("wrote %s and %s\n", out.c_str(), csv.c_str());
    }
    return 0;
}

int cmd_failover(const FailoverArgs& a) {
    std::vector<double> gaps;
    json runs = json::array();
    bool converged = true;
    for (std::size_t k = 0; k < a.seeds; ++k) {
        FailoverConfig fc;
        fc.seed = a.seed + k;
        fc.replicas = a.replicas;
        fc.clients = a.clients;
        fc.kill_follower = a.kill_follower;
        auto r = run_failover(fc);
        gaps.push_back(static_cast<double>(r.gap) / 1e6);
        converged = converged && r.converged;
        runs.push_back(json::parse(r.to_json()));
        std::printf("seed %llu: killed node %u, new leader %u, gap %.1f ms, converged %s\n",
                    static_cast<unsigned long long>(fc.seed), r.victim, r.new_leader, gaps.back(),
                    r.converged ? "yes" : "no");
    }
    auto sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double p) {
        auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size()))) - 1;
        return sorted[std::min(idx, sorted.size() - 1)];
    };
    std::printf("gap over %zu seeds: p50 %.1f ms, p95 %.1f ms, max %.1f ms\n", sorted.size(), pct(0.5), pct(0.95),
                sorted.back());
    if (!a.out.empty()) {
        json j{{"runs", runs}, {"p50_ms", pct(0.5)}, {"p95_ms", pct(0.95)}, {"max_ms", sorted.back()}};
        write_file(a.out, j.dump(2));
    }
    return converged ? 0 : 1;
}

FsckReport fsck_nvm(const Medium& medium) {
    FsckReport rep;
    Bytes image(medium.size());
    medium.read(0, image);
    ByteReader r(ByteSpan(image.data(), std::min<std::size_t>(image.size(), 40)));
    if (image.size() < 40) {
        rep.ok = false;
        rep.findings.push_back("file too small for an NVM header");
        return rep;
    }
    r.u64();
    r.u32();
    auto ring = r.u32();
    r.u64();
    r.u64();
    auto max_entry = r.u32();
    // Recovery may rewrite stale slots, so it runs on a private copy.
    try {
        auto region = NvmRegion::open(std::make_shared<MemoryMedium>(std::move(image)),
                                      NvmConfig{medium.size(), ring, max_entry});
        auto entries = region->entries();
        rep.records = entries.size();
        if (!entries.empty()) {
            rep.first_lsn = entries.front().lsn;
            rep.last_lsn = entries.back().lsn;
        }
        for (std::size_t i = 1; i < entries.size(); ++i) {
            if (entries[i].lsn != entries[i - 1].lsn + 1) {
                rep.ok = false;
                rep.findings.push_back("LSN gap after " + std::to_string(entries[i - 1].lsn));
            }
        }
        auto meta = region->load_meta();
        rep.dump.push_back("term " + std::to_string(meta.term) + ", voted_for " +
                           (meta.voted_for ? std::to_string(*meta.voted_for) : std::string("none")));
    } catch (const Error& e) {
        rep.ok = false;
        rep.findings.push_back(e.what());
    }
    return rep;
}

int cmd_fsck(const std::string& path, bool dump) {
    if (!fs::exists(path)) throw std::runtime_error("no such file: " + path);
    FileMedium medium(path);
    if (medium.size() < 8) throw std::runtime_error(path + " is too small to hold a header");
    Bytes head(8);
    medium.read(0, head);
    auto magic = ByteReader(head).u64();
    FsckReport rep;
    const char* kind = nullptr;
    if (magic == kFlashMagic) {
        kind = "flashlog";
        rep = fsck_flashlog(medium, dump);
    } else if (magic == kNvmMagic) {
        kind = "nvm";
        rep = fsck_nvm(medium);
    } else {
        std::printf("%s: unknown format\n", path.c_str());
        return 2;
    }
    std::printf("%s: %s, %llu records", path.c_str(), kind, static_cast<unsigned long long>(rep.records));
    if (rep.fragments > 0) std::printf(", %llu fragments", static_cast<unsigned long long>(rep.fragments));
    if (rep.first_lsn != kNoLsn) {
        std::printf(", lsn %llu..%llu", static_cast<unsigned long long>(rep.first_lsn),
                    static_cast<unsigned long long>(rep.last_lsn));
    }
    if (rep.tail_truncated) std::printf(", torn tail");
    std::printf(": %s\n", rep.ok ? "OK" : "CORRUPT");
    for (const auto& f : rep.findings) std::printf("  %s\n", f.c_str());
    if (dump) {
        for (const auto& d : rep.dump) std::printf("  %s\n", d.c_str());
    }
    return rep.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cyclone replicated log tools"};
    app.require_subcommand(1);
    BenchArgs bench;
    FailoverArgs failover;
    try {
        load_config(bench, failover);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    auto* b = app.add_subcommand("bench", "Run a workload against a cluster");
    b->add_option("--preset", bench.preset, "Workload preset")->capture_default_str();
    b->add_option("--replicas", bench.replicas, "Replicas per log")->capture_default_str()->check(CLI::Range(1, 9));
    b->add_option("--logs", bench.logs, "Physical logs")->capture_default_str()->check(CLI::Range(1, 64));
    b->add_option("--transport", bench.transport, "sim or udp")
        ->capture_default_str()
        ->check(CLI::IsMember({"sim", "udp"}));
    b->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
    b->add_option("--out", bench.out, "JSON report path; a CSV is written next to it");
    b->add_flag("--no-batching", bench.no_batching, "Send one entry per message");
    b->add_option("--sweep", bench.sweep, "Client counts for an offered-load sweep")->delimiter(',');
    b->add_option("--clients", bench.clients, "Override the preset's client count");
    b->add_option("--duration-ms", bench.duration_ms, "Measured window");
    b->add_option("--warmup-ms", bench.warmup_ms, "Warmup before the window");
    b->add_option("--keys", bench.keys, "Key space size");
    b->add_option("--host", bench.host, "Bind address for udp")->capture_default_str();

    auto* f = app.add_subcommand("failover", "Kill the leader under load and report the availability gap");
    f->add_option("--seed", failover.seed, "First seed")->capture_default_str();
    f->add_option("--seeds", failover.seeds, "Number of consecutive seeds")->capture_default_str()->check(CLI::Range(1, 100000));
    f->add_option("--replicas", failover.replicas, "Replicas")->capture_default_str()->check(CLI::Range(3, 9));
    f->add_option("--clients", failover.clients, "Closed-loop clients")->capture_default_str();
    f->add_flag("--kill-follower", failover.kill_follower, "Kill a follower instead of the leader");
    f->add_option("--out", failover.out, "JSON report path");

    std::string fsck_path;
    bool fsck_dump = false;
    auto* k = app.add_subcommand("fsck", "Check a flashlog or NVM region file");
    k->add_option("file", fsck_path, "File to check")->required();
    k->add_flag("--dump", fsck_dump, "List every record");

    auto* p = app.add_subcommand("presets", "List workload presets");

    CLI11_PARSE(app, argc, argv);
    try {
        if (b->parsed()) return cmd_bench(bench);
        if (f->parsed()) return cmd_failover(failover);
        if (k->parsed()) return cmd_fsck(fsck_path, fsck_dump);
        if (p->parsed()) {
            for (const auto& name : preset_names()) {
                auto s = preset(name);
                std::printf("%-14s update %3.0f%%  read %3.0f%%  weak %3.0f%%  mean value %.0f B  (synthetic, paper-shaped)\n",
                            name.c_str(), s.mix.update_pct, s.mix.read_pct, s.mix.weak_read_pct, s.value_size.mean());
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
