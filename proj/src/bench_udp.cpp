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

#include <memory>
#include <optional>
#include <thread>

#include "bench_internal.hpp"
#include "cyclone/udp_cluster.hpp"

namespace cyclone::bench_detail {

namespace {

struct Driver {
    UdpTransport* transport;
    std::unique_ptr<Client> client;
    bool idle = true;
};

}  // namespace

BenchReport run_udp_once(const WorkloadSpec& spec, const BenchClusterConfig& bc) {
    UdpClusterConfig uc;
    uc.replicas = bc.replicas;
    uc.num_logs = bc.logs;
    uc.batching = bc.batching;
    uc.host = bc.host;
    uc.seed = bc.seed;
    UdpCluster cluster(uc);
    std::vector<Driver> drivers;
    for (std::size_t k = 0; k < spec.clients; ++k) {
        auto id = static_cast<NodeId>(1000 + k);
        auto& t = cluster.add_client_transport(id);
        ClientConfig cc;
        cc.id = id;
        cc.replicas = cluster.replica_ids();
        cc.num_logs = bc.logs;
        drivers.push_back({&t, std::make_unique<Client>(cc, t)});
    }
    cluster.start();

    Rng rng(bc.seed * 0x2545F4914F6CDD1DULL + 7);
    std::vector<Sample> samples;
    auto drive_until = [&](TimeNs until, bool issue, const std::function<bool()>& done) {
        while (wall_now() < until && !(done && done())) {
            bool progress = false;
            for (auto& d : drivers) {
                auto now = wall_now();
                for (auto& p : d.transport->recv_batch(0, 64)) {
                    d.client->on_packet(p, now);
                    progress = true;
                }
                if (d.client->busy() && now >= d.client->next_deadline()) d.client->tick(now);
                if (issue && d.idle) {
                    d.idle = false;
                    auto kind = pick(spec.mix, rng);
                    auto key = make_key(rng.below(spec.keys), spec.key_size);
                    auto cb = [&samples, &d, kind](const ClientResult& r) {
                        samples.push_back({kind, r.start, r.end, r.status == Status::Ok || r.status == Status::NotFound});
                        d.idle = true;
                    };
                    switch (kind) {
                        case OpKind::Update: d.client->put(key, std::string(spec.value_size.sample(rng), 'v'), now, cb); break;
                        case OpKind::Read: d.client->get(key, now, cb); break;
                        case OpKind::WeakRead: d.client->weak_get(key, now, cb); break;
                    }
                    progress = true;
                }
            }
            if (!progress) std::this_thread::sleep_for(std::chrono::microseconds(20));
        }
    };

    // Probe until a write goes through, so elections are out of the window.
    std::optional<Status> probe;
    drivers[0].client->put("probe", "1", wall_now(), [&](const ClientResult& r) { probe = r.status; });
    drivers[0].idle = false;
    drive_until(wall_now() + 10 * kSeconds, false, [&] { return probe.has_value(); });
    drivers[0].idle = true;
    if (probe != Status::Ok) {
        cluster.stop();
        fail(ErrorCode::ClusterUnavailable, "udp cluster did not accept writes");
    }

    auto t0 = wall_now();
    auto stop = t0 + spec.warmup + spec.duration;
    drive_until(stop, true, {});
    cluster.stop();

    BenchReport r;
    r.spec = spec;
    r.cluster = bc;
    r.clock = "wall";
    summarize(samples, t0 + spec.warmup, stop, r);
    return r;
}

}  // namespace cyclone::bench_detail
