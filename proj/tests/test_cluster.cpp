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

#include "cyclone/cluster.hpp"

namespace cyclone {
namespace {

SimClusterConfig small(std::size_t replicas = 3, std::uint16_t logs = 1) {
    SimClusterConfig c;
    c.replicas = replicas;
    c.num_logs = logs;
    c.nvm = NvmConfig{1 << 20, 256, 9000};
    c.flash_chunk = 1 << 20;
    return c;
}

ClientResult call(SimCluster& cl, std::size_t k, const std::function<void(Client&, TimeNs, Client::Callback)>& op,
                  TimeNs limit = 5 * kSeconds) {
    std::optional<ClientResult> out;
    cl.with_client(k, [&](Client& c, TimeNs now) { op(c, now, [&](const ClientResult& r) { out = r; }); });
    auto deadline = cl.now() + limit;
    while (!out && cl.now() < deadline) cl.run_for(1 * kMillis);
    EXPECT_TRUE(out.has_value());
    return out.value_or(ClientResult{Status::Unavailable});
}

TEST(SimCluster, ElectsOneLeaderOnFreshStart) {
    SimCluster cl(small());
    cl.run_for(1 * kSeconds);
    auto l = cl.leader(0);
    ASSERT_TRUE(l.has_value());
    int leaders = 0;
    for (std::size_t i = 0; i < cl.size(); ++i) leaders += cl.node(i).instance(0).is_leader() ? 1 : 0;
    EXPECT_EQ(leaders, 1);
    EXPECT_EQ(cl.node(*l).instance(0).term(), 1u);
}

TEST(SimCluster, PutThenGet) {
    SimCluster cl(small());
    auto k = cl.add_client();
    cl.run_for(1 * kSeconds);
    auto r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.put("alpha", "one", now, cb); });
    EXPECT_EQ(r.status, Status::Ok);
    r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.get("alpha", now, cb); });
    EXPECT_EQ(r.status, Status::Ok);
    EXPECT_EQ(r.value, "one");
    r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.weak_get("alpha", now, cb); });
    EXPECT_EQ(r.status, Status::Ok);
    EXPECT_EQ(r.value, "one");
    r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.del("missing", now, cb); });
    EXPECT_EQ(r.status, Status::NotFound);
    ASSERT_TRUE(cl.run_until_quiescent(2 * kSeconds));
    auto h = cl.state_hashes();
    EXPECT_EQ(h[0], h[1]);
    EXPECT_EQ(h[1], h[2]);
}

TEST(SimCluster, KillLeaderThenRestartConverges) {
    SimCluster cl(small());
    auto k = cl.add_client();
    cl.run_for(1 * kSeconds);
    for (int i = 0; i < 20; ++i) {
        auto r = call(cl, k, [i](Client& c, TimeNs now, auto cb) { c.put("k" + std::to_string(i), "v", now, cb); });
        ASSERT_EQ(r.status, Status::Ok);
    }
    auto l = *cl.leader(0);
    cl.kill(l);
    for (int i = 20; i < 40; ++i) {
        auto r = call(cl, k, [i](Client& c, TimeNs now, auto cb) { c.put("k" + std::to_string(i), "w", now, cb); });
        ASSERT_EQ(r.status, Status::Ok);
    }
    cl.restart(l);
    ASSERT_TRUE(cl.run_until_quiescent(5 * kSeconds));
    auto h = cl.state_hashes();
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h[0], h[1]);
    EXPECT_EQ(h[1], h[2]);
    EXPECT_EQ(cl.node(l).store().size(), 40u);
}

TEST(SimCluster, GangAcrossLogsAfterColocation) {
    SimCluster cl(small(3, 4));
    auto k = cl.add_client();
    cl.run_for(3 * kSeconds);
    auto l = cl.leader(0);
    ASSERT_TRUE(l.has_value());
    EXPECT_TRUE(cl.node(*l).colocated());
    std::vector<GangItem> items;
    for (int i = 0; i < 8; ++i) items.push_back({Op::Put, "g" + std::to_string(i), "x"});
    auto r = call(cl, k, [&](Client& c, TimeNs now, auto cb) { c.gang(items, now, cb); });
    EXPECT_EQ(r.status, Status::Ok);
    r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.snapshot(now, cb); });
    EXPECT_EQ(r.status, Status::Ok);
    EXPECT_NE(r.snapshot_id, 0u);
    r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.get("g5", now, cb); });
    EXPECT_EQ(r.value, "x");
    ASSERT_TRUE(cl.run_until_quiescent(2 * kSeconds));
    auto h = cl.state_hashes();
    EXPECT_EQ(h[0], h[1]);
    EXPECT_EQ(h[1], h[2]);
}

TEST(SimCluster, IsolatedLeaderCannotCommit) {
    SimCluster cl(small());
    auto k = cl.add_client();
    cl.run_for(1 * kSeconds);
    auto old = *cl.leader(0);
    auto old_term = cl.node(old).instance(0).term();
    auto commit_before = cl.node(old).instance(0).commit_index();
    cl.net().add_partition({cl.now(), cl.now() + 500 * kMillis, {SimCluster::node_id(old)}});
    // The majority side elects a new leader and keeps serving.
    auto r = call(cl, k, [](Client& c, TimeNs now, auto cb) { c.put("p", "majority", now, cb); });
    EXPECT_EQ(r.status, Status::Ok);
    EXPECT_EQ(cl.node(old).instance(0).commit_index(), commit_before);
    cl.run_for(600 * kMillis);
    ASSERT_TRUE(cl.run_until_quiescent(3 * kSeconds));
    EXPECT_GT(cl.node(old).instance(0).term(), old_term);
    EXPECT_EQ(cl.node(old).store().get("p").value, "majority");
}

TEST(SimCluster, TermSurvivesRestart) {
    SimCluster cl(small());
    cl.run_for(1 * kSeconds);
    auto l = *cl.leader(0);
    cl.kill(l);
    cl.run_for(1 * kSeconds);
    auto term = cl.node(*cl.leader(0)).instance(0).term();
    EXPECT_GE(term, 2u);
    cl.restart(l);
    EXPECT_GE(cl.node(l).instance(0).term(), 1u);
    ASSERT_TRUE(cl.run_until_quiescent(3 * kSeconds));
    EXPECT_GE(cl.node(l).instance(0).term(), term);
}

TEST(Client, RetriesAcrossLeaderChange) {
    SimCluster cl(small());
    auto k = cl.add_client();
    cl.run_for(1 * kSeconds);
    std::optional<ClientResult> out;
    cl.with_client(k, [&](Client& c, TimeNs now) { c.put("r", "1", now, [&](const ClientResult& r) { out = r; }); });
    cl.kill(*cl.leader(0));
    while (!out && cl.now() < 5 * kSeconds) cl.run_for(1 * kMillis);
    ASSERT_TRUE(out.has_value());
    EXPECT_EQ(out->status, Status::Ok);
    EXPECT_GT(out->attempts, 1u);
    EXPECT_GT(cl.client(k).stats().timeouts, 0u);
}

}  // namespace
}  // namespace cyclone
