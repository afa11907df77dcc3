#include "jcall/net/engine.hpp"

#include <chrono>

namespace jcall {

namespace {
std::int64_t steady_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
}  // namespace

Engine::Engine(ClockMode mode) : mode_(mode) { real_base_ns_ = steady_ns(); }

Micros Engine::now() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (mode_ == ClockMode::Virtual) return virtual_now_;
  return real_now_locked();
}

Micros Engine::real_now_locked() const {
  return (steady_ns() - real_base_ns_) / 1000;
}

Engine::TimerId Engine::schedule_after(Micros delay, std::function<void()> fn) {
  if (delay < 0) delay = 0;
  std::lock_guard<std::mutex> lock(mu_);
  Micros base = mode_ == ClockMode::Virtual ? virtual_now_ : real_now_locked();
  TimerId id = next_id_++;
  queue_.push(Item{base + delay, next_seq_++, id, std::move(fn)});
  live_.insert(id);
  cv_.notify_all();
  return id;
}

Engine::TimerId Engine::schedule_at(Micros due, std::function<void()> fn) {
  std::lock_guard<std::mutex> lock(mu_);
  Micros base = mode_ == ClockMode::Virtual ? virtual_now_ : real_now_locked();
  if (due < base) due = base;
  TimerId id = next_id_++;
  queue_.push(Item{due, next_seq_++, id, std::move(fn)});
  live_.insert(id);
  cv_.notify_all();
  return id;
}

void Engine::cancel(TimerId id) {
  std::lock_guard<std::mutex> lock(mu_);
  if (live_.count(id)) cancelled_.insert(id);
}

void Engine::post(std::function<void()> fn) { schedule_after(0, std::move(fn)); }

void Engine::post_external(std::function<void()> fn) {
  schedule_after(0, std::move(fn));
}

bool Engine::pop_next(Item& out, bool respect_deadline, Micros deadline) {
  std::unique_lock<std::mutex> lock(mu_);
  for (;;) {
    if (stop_) return false;
    if (queue_.empty()) {
      if (mode_ == ClockMode::Virtual) return false;
      cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
      continue;
    }
    const Item& top = queue_.top();
    if (cancelled_.count(top.id)) {
      cancelled_.erase(top.id);
      live_.erase(top.id);
      queue_.pop();
      continue;
    }
    if (mode_ == ClockMode::Virtual) {
      if (respect_deadline && top.due > deadline) return false;
      out = top;
      queue_.pop();
      live_.erase(out.id);
      virtual_now_ = out.due;
      return true;
    }
    Micros rn = real_now_locked();
    if (top.due > rn) {
      auto wake = std::chrono::steady_clock::time_point(
          std::chrono::nanoseconds(real_base_ns_ + top.due * 1000));
      cv_.wait_until(lock, wake);
      continue;
    }
    out = top;
    queue_.pop();
    live_.erase(out.id);
    return true;
  }
}

void Engine::run() {
  Item item;
  while (pop_next(item, false, 0)) item.fn();
}

void Engine::run_until(Micros deadline) {
  Item item;
  while (pop_next(item, true, deadline)) item.fn();
  std::lock_guard<std::mutex> lock(mu_);
  if (mode_ == ClockMode::Virtual && virtual_now_ < deadline)
    virtual_now_ = deadline;
}

void Engine::stop() {
  std::lock_guard<std::mutex> lock(mu_);
  stop_ = true;
  cv_.notify_all();
}

bool Engine::stop_requested() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stop_;
}

std::size_t Engine::pending() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.size();
}

}  // namespace jcall
