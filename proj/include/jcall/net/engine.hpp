#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <unordered_set>
#include <vector>

#include "jcall/net/clock.hpp"

namespace jcall {

/// Single-threaded event scheduler shared by every node of a topology.
///
/// Two callbacks scheduled for the same instant run in insertion order, which
/// is what makes virtual-clock runs fully reproducible. In real mode the same
/// queue is dispatched against steady_clock and other threads may hand work in
/// through post_external().
class Engine {
public:
  using TimerId = std::uint64_t;

  explicit Engine(ClockMode mode);

  ClockMode mode() const { return mode_; }
  Micros now() const;

  TimerId schedule_after(Micros delay, std::function<void()> fn);
  TimerId schedule_at(Micros due, std::function<void()> fn);
  void cancel(TimerId id);

  // Runs fn at the current instant, after everything already queued for it.
  void post(std::function<void()> fn);
  // Thread-safe variant for feeder threads (UDP receivers). Wakes the loop.
  void post_external(std::function<void()> fn);

  // Virtual mode: dispatches until the queue drains or stop() is called.
  // Real mode: dispatches until stop() is called.
  void run();
  // Virtual mode only: dispatches everything due up to and including the
  // deadline, then sets the clock to the deadline.
  void run_until(Micros deadline);

  void stop();
  bool stop_requested() const;

  std::size_t pending() const;

private:
  struct Item {
    Micros due;
    std::uint64_t seq;
    TimerId id;
    std::function<void()> fn;
  };
  struct ItemOrder {
    bool operator()(const Item& a, const Item& b) const {
      if (a.due != b.due) return a.due > b.due;
      return a.seq > b.seq;
    }
  };

  bool pop_next(Item& out, bool respect_deadline, Micros deadline);
  Micros real_now_locked() const;

  ClockMode mode_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::priority_queue<Item, std::vector<Item>, ItemOrder> queue_;
  std::unordered_set<TimerId> cancelled_;
  std::unordered_set<TimerId> live_;
  Micros virtual_now_ = 0;
  std::int64_t real_base_ns_ = 0;
  std::uint64_t next_seq_ = 1;
  TimerId next_id_ = 1;
  bool stop_ = false;
};

}  // namespace jcall
