#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

namespace fdilab::net {

/// Simulated time in integer nanoseconds since scenario start.
using Duration = std::chrono::duration<std::int64_t, std::nano>;
using SimTime = Duration;

constexpr Duration from_seconds(double s) {
  return Duration(static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5)));
}
constexpr double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1e9; }
constexpr Duration millis(double ms) { return from_seconds(ms / 1000.0); }

/// Single-threaded discrete-event scheduler. Events at the same instant run in
/// the order they were scheduled.
///
/// With a non-zero compression factor the loop paces itself so one simulated
/// second takes `compression` wall seconds; pacing never changes event order.
class Scheduler {
 public:
  using Task = std::function<void()>;
  using TimerId = std::uint64_t;

  [[nodiscard]] SimTime now() const { return now_; }

  TimerId at(SimTime when, Task task);
  TimerId after(Duration delay, Task task) { return at(now_ + delay, std::move(task)); }
  void cancel(TimerId id);

  /// Runs events until the queue is empty or the next event is past `end`.
  /// The clock is left at `end`.
  void run_until(SimTime end);
  void stop() { stopped_ = true; }

  void set_compression(double wall_seconds_per_sim_second) { compression_ = wall_seconds_per_sim_second; }
  [[nodiscard]] double compression() const { return compression_; }
  [[nodiscard]] std::uint64_t executed() const { return executed_; }

 private:
  struct Event {
    SimTime when;
    std::uint64_t seq;
    TimerId id;
    Task task;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  void pace(SimTime target);

  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  TimerId next_id_ = 1;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_set<TimerId> cancelled_;
  bool stopped_ = false;
  double compression_ = 0.0;
  std::uint64_t executed_ = 0;
  std::chrono::steady_clock::time_point wall_start_{};
  bool wall_started_ = false;
};

}  // namespace fdilab::net
