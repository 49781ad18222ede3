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

#include "cyclone/sim.hpp"

namespace cyclone {

void EventLoop::at(TimeNs when, Task task) {
    if (when < now_) when = now_;
    queue_.push({when, seq_++, std::move(task)});
}

bool EventLoop::step() {
    if (queue_.empty()) return false;
    // priority_queue::top is const; the task is moved out via const_cast before pop.
    auto& top = const_cast<Event&>(queue_.top());
    now_ = top.when;
    Task task = std::move(top.task);
    queue_.pop();
    ++executed_;
    task();
    return true;
}

void EventLoop::run_until(TimeNs until) {
    while (!queue_.empty() && queue_.top().when <= until) step();
    if (until > now_) now_ = until;
}

}  // namespace cyclone
