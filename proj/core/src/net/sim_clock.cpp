#include "fdilab/net/sim_clock.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace fdilab::net {

Scheduler::TimerId Scheduler::at(SimTime when, Task task) {
  if (when < now_) when = now_;
  const TimerId id = next_id_++;
  queue_.push(Event{when, next_seq_++, id, std::move(task)});
  return id;
}

void Scheduler::cancel(TimerId id) {
  if (id != 0 && id < next_id_) cancelled_.insert(id);
}

void Scheduler::pace(SimTime target) {
  if (compression_ <= 0.0) return;
  if (!wall_started_) {
    wall_start_ = std::chrono::steady_clock::now();
    wall_started_ = true;
  }
  const auto wall_target =
      wall_start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(to_seconds(target) * compression_));
  if (wall_target > std::chrono::steady_clock::now()) std::this_thread::sleep_until(wall_target);
}

void Scheduler::run_until(SimTime end) {
  stopped_ = false;
  while (!queue_.empty() && !stopped_) {
    if (queue_.top().when > end) break;
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    if (cancelled_.erase(ev.id) != 0) continue;
    pace(ev.when);
    now_ = ev.when;
    ++executed_;
    ev.task();
  }
  if (!stopped_ && now_ < end) {
    pace(end);
    now_ = end;
  }
}

}  // namespace fdilab::net
