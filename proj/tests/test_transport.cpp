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

#include <gtest/gtest.h>

#include <optional>
#include <thread>

#include "cyclone/client.hpp"
#include "cyclone/cluster.hpp"
#include "cyclone/multilog.hpp"
#include "cyclone/transport.hpp"
#include "cyclone/udp_cluster.hpp"

namespace cyclone {
namespace {

Packet packet(NodeId src, NodeId dst, std::uint16_t instance, std::size_t payload = 0) {
    CommonHeader h;
    h.type = MsgType::AppendEntries;
    h.instance = instance;
    h.src = src;
    Packet p;
    p.src = src;
    p.dst = dst;
    p.header = encode_bare(h);
    if (payload > 0) p.payload.push_back(PayloadHandle::adopt(Bytes(payload)));
    return p;
}

TEST(SimNet, DeliversPerInstance) {
    EventLoop loop;
    SimNetwork net(loop, SimNetConfig{});
    auto& a = net.attach(1, 2);
    auto& b = net.attach(2, 2);
    a.send(packet(1, 2, 1, 10));
    a.send(packet(1, 2, 0));
    loop.run_until(1 * kMillis);
    EXPECT_EQ(b.queued(0), 1u);
    EXPECT_EQ(b.queued(1), 1u);
    auto got = b.recv_batch(1);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(chain_size(got[0].payload), 10u);
}

TEST(SimNet, RejectsOversizedDatagram) {
    EventLoop loop;
    SimNetwork net(loop, SimNetConfig{});
    auto& a = net.attach(1, 1);
    net.attach(2, 1);
    try {
        a.send(packet(1, 2, 0, kMtu));
        FAIL() << "expected SendTooLarge";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SendTooLarge);
    }
}

TEST(SimNet, DownNodesAndPartitionsDrop) {
    EventLoop loop;
    SimNetConfig cfg;
    cfg.partitions.push_back({0, 10 * kMillis, {1}});
    SimNetwork net(loop, cfg);
    auto& a = net.attach(1, 1);
    auto& b = net.attach(2, 1);
    a.send(packet(1, 2, 0));
    loop.run_until(1 * kMillis);
    EXPECT_EQ(b.queued(0), 0u);
    loop.run_until(20 * kMillis);
    a.send(packet(1, 2, 0));
    loop.run_until(21 * kMillis);
    EXPECT_EQ(b.queued(0), 1u);
    // A down node loses its queue and receives nothing.
    net.set_up(2, false);
    EXPECT_EQ(b.queued(0), 0u);
    a.send(packet(1, 2, 0));
    loop.run_until(22 * kMillis);
    EXPECT_EQ(b.queued(0), 0u);
}

TEST(SimNet, DropRateIsRoughlyHonoured) {
    EventLoop loop;
    SimNetConfig cfg;
    cfg.drop = 0.2;
    SimNetwork net(loop, cfg);
    auto& a = net.attach(1, 1);
    net.attach(2, 1);
    for (int i = 0; i < 5000; ++i) a.send(packet(1, 2, 0));
    loop.run_until(1 * kSeconds);
    auto dropped = static_cast<double>(net.stats().dropped) / 5000.0;
    EXPECT_NEAR(dropped, 0.2, 0.03);
}

std::pair<std::uint64_t, std::vector<std::uint64_t>> traced_run(std::uint64_t seed) {
    SimClusterConfig c;
    c.seed = seed;
    c.num_logs = 2;
    c.nvm = NvmConfig{1 << 20, 256, 9000};
    c.flash_chunk = 1 << 20;
    c.net.drop = 0.05;
    c.net.reorder = 0.1;
    SimCluster cl(c);
    auto k = cl.add_client();
    cl.run_for(500 * kMillis);
    for (int i = 0; i < 20; ++i) {
        cl.with_client(k, [i](Client& client, TimeNs now) {
            if (!client.busy()) client.put("k" + std::to_string(i % 5), std::to_string(i), now, [](const ClientResult&) {});
        });
        cl.run_for(20 * kMillis);
    }
    cl.kill(0);
    cl.run_for(300 * kMillis);
    cl.restart(0);
    cl.run_until_quiescent(5 * kSeconds);
    return {cl.net().trace_hash(), cl.state_hashes()};
}

TEST(SimNet, SameSeedSameTrace) {
    auto a = traced_run(11);
    auto b = traced_run(11);
    auto c = traced_run(12);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
    EXPECT_NE(a.first, c.first);
}

TEST(Route, StableAndSpread) {
    std::vector<int> hits(8, 0);
    for (int i = 0; i < 8000; ++i) {
        auto key = "key" + std::to_string(i);
        auto r = route(key, 8);
        ASSERT_LT(r, 8);
        EXPECT_EQ(r, route(key, 8));
        ++hits[r];
    }
    for (int h : hits) EXPECT_GT(h, 700);
    EXPECT_EQ(route("anything", 1), 0);
}

TEST(Udp, LoopbackDatagrams) {
    UdpTransport a(1, "127.0.0.1", 0, 2);
    UdpTransport b(2, "127.0.0.1", 0, 2);
    a.add_peer(2, "127.0.0.1", b.port());
    a.send(packet(1, 2, 1, 1000));
    ASSERT_TRUE(b.wait_readable(1 * kSeconds));
    b.pump();
    auto got = b.recv_batch(1);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].src, 1u);
    EXPECT_EQ(chain_size(got[0].payload) + got[0].header.size(), kCommonHeaderSize + 1000);
    EXPECT_THROW(a.send(packet(1, 2, 0, kMtu)), Error);
}

TEST(Udp, ClusterServesPutAndGet) {
    UdpClusterConfig uc;
    uc.num_logs = 2;
    UdpCluster cluster(uc);
    auto& t = cluster.add_client_transport(1000);
    ClientConfig cc;
    cc.id = 1000;
    cc.replicas = cluster.replica_ids();
    cc.num_logs = 2;
    Client client(cc, t);
    cluster.start();

    auto drive = [&](const std::function<void(Client::Callback)>& op) {
        std::optional<ClientResult> out;
        op([&](const ClientResult& r) { out = r; });
        auto deadline = wall_now() + 10 * kSeconds;
        while (!out && wall_now() < deadline) {
            auto now = wall_now();
            for (auto& p : t.recv_batch(0, 64)) client.on_packet(p, now);
            if (client.busy() && now >= client.next_deadline()) client.tick(now);
            t.wait_readable(1 * kMillis);
            t.pump();
        }
        return out;
    };
    auto put = drive([&](auto cb) { client.put("udp-key", "v1", wall_now(), cb); });
    ASSERT_TRUE(put.has_value());
    EXPECT_EQ(put->status, Status::Ok);
    auto get = drive([&](auto cb) { client.get("udp-key", wall_now(), cb); });
    ASSERT_TRUE(get.has_value());
    EXPECT_EQ(get->status, Status::Ok);
    EXPECT_EQ(get->value, "v1");
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    cluster.stop();
    auto h = cluster.state_hashes();
    EXPECT_EQ(h[0], h[1]);
    EXPECT_EQ(h[1], h[2]);
}

}  // namespace
}  // namespace cyclone
