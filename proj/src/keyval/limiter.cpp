#include <algorithm>

#include "coffeescan/keyval.hpp"

namespace coffeescan::keyval {

Clock::time_point FakeLimiterClock::now() {
  std::lock_guard lk(mu_);
  return now_;
}

void FakeLimiterClock::sleep_until(Clock::time_point t) {
  std::lock_guard lk(mu_);
  now_ = std::max(now_, t);
}

void FakeLimiterClock::advance(Clock::duration d) {
  std::lock_guard lk(mu_);
  now_ += d;
}

RateLimiter::RateLimiter(RateLimitPolicy policy, std::shared_ptr<LimiterClock> clock)
    : policy_(policy), clock_(clock ? std::move(clock) : std::make_shared<SystemLimiterClock>()) {}

RateLimiter::Permit& RateLimiter::Permit::operator=(Permit&& other) noexcept {
  if (this != &other) {
    if (owner_) owner_->release();
    owner_ = std::exchange(other.owner_, nullptr);
  }
  return *this;
}

RateLimiter::Permit::~Permit() {
  if (owner_) owner_->release();
}

RateLimiter::Permit RateLimiter::acquire() {
  std::unique_lock lk(mu_);
  for (;;) {
    cv_.wait(lk, [&] { return policy_.max_concurrent == 0 || in_flight_ < policy_.max_concurrent; });
    if (policy_.max_requests == 0) break;
    const auto now = clock_->now();
    while (!recent_.empty() && recent_.front() <= now - policy_.window) recent_.pop_front();
    if (recent_.size() < policy_.max_requests) break;
    const auto until = recent_.front() + policy_.window;
    lk.unlock();
    clock_->sleep_until(until);
    lk.lock();
  }
  ++in_flight_;
  const auto now = clock_->now();
  if (policy_.max_requests != 0) recent_.push_back(now);
  grants_.push_back(now);
  return Permit(this);
}

void RateLimiter::release() {
  {
    std::lock_guard lk(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::vector<Clock::time_point> RateLimiter::grants() const {
  std::lock_guard lk(mu_);
  return grants_;
}

bool respects_limit(std::vector<Clock::time_point> times, std::size_t max, Clock::duration window) {
  if (max == 0) return true;
  std::sort(times.begin(), times.end());
  for (std::size_t i = 0; i + max < times.size(); ++i) {
    if (times[i + max] - times[i] < window) return false;
  }
  return true;
}

}  // namespace coffeescan::keyval
