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

#include "support/raft_checker.hpp"

namespace cyclone::testing {

namespace {

std::uint64_t chain_hash(const PayloadHandle& h) { return fnv1a64(h.bytes()); }

}  // namespace

RaftSafetyChecker::RaftSafetyChecker(SimCluster& cluster)
    : cluster_(cluster),
      logs_(cluster.config().num_logs),
      cursors_(cluster.size(), std::vector<Cursor>(cluster.config().num_logs)) {
    cluster_.set_poll_observer([this](std::size_t i, std::uint16_t log) { check(i, log); });
}

std::size_t RaftSafetyChecker::leaders_seen() const {
    std::size_t n = 0;
    for (const auto& l : logs_) n += l.leaders.size();
    return n;
}

void RaftSafetyChecker::violation(std::string what) {
    if (violations_.size() < 16) violations_.push_back(std::move(what));
}

void RaftSafetyChecker::check_all() {
    for (std::size_t i = 0; i < cluster_.size(); ++i) {
        if (!cluster_.alive(i)) continue;
        for (std::uint16_t l = 0; l < logs_.size(); ++l) check(i, l);
    }
}

void RaftSafetyChecker::check(std::size_t i, std::uint16_t log) {
    if (!cluster_.alive(i)) return;
    const Node& node = cluster_.node(i);
    const auto& inst = node.instance(log);
    const auto& rlog = inst.log();
    auto& st = logs_[log];
    auto& cur = cursors_[i][log];
    if (cur.node != &node) cur = Cursor{&node, 0};  // restarted: rescan everything
    auto id = SimCluster::node_id(i);
    auto tag = [&] { return "log " + std::to_string(log) + " node " + std::to_string(id) + ": "; };

    if (inst.is_leader()) {
        auto [it, fresh] = st.leaders.emplace(inst.term(), id);
        if (it->second != id) {
            violation(tag() + "second leader in term " + std::to_string(inst.term()));
        }
        if (st.completeness_checked.emplace(inst.term(), id).second) {
            for (std::uint64_t x = 1; x < st.committed.size(); ++x) {
                if (x > rlog.last_index() || rlog.term_at(x) != st.committed[x]) {
                    violation(tag() + "leader of term " + std::to_string(inst.term()) + " lacks committed entry " +
                              std::to_string(x));
                    break;
                }
            }
        }
        (void)fresh;
    }

    auto last = rlog.last_index();
    for (auto x = cur.commit + 1; x <= last; ++x) {
        auto t = rlog.term_at(x);
        EntryInfo info{chain_hash(rlog.payload(x)), x > 1 ? rlog.term_at(x - 1) : 0};
        auto [it, fresh] = st.entries.emplace(std::make_pair(x, t), info);
        if (!fresh && (it->second.hash != info.hash || it->second.prev_term != info.prev_term)) {
            violation(tag() + "log matching broken at index " + std::to_string(x) + " term " + std::to_string(t));
        }
    }

    auto commit = inst.commit_index();
    if (commit > last) violation(tag() + "commit index beyond log end");
    for (auto x = cur.commit + 1; x <= std::min(commit, last); ++x) {
        auto t = rlog.term_at(x);
        if (x < st.committed.size()) {
            if (st.committed[x] != t) violation(tag() + "committed entry " + std::to_string(x) + " changed term");
        } else if (x == st.committed.size()) {
            st.committed.push_back(t);
        } else {
            violation(tag() + "commit past a gap at " + std::to_string(x));
        }
    }
    cur.commit = std::max(cur.commit, std::min(commit, last));
}

}  // namespace cyclone::testing
