#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "coffeescan/protolab.hpp"

// Online confirmation of candidate master keys against a token endpoint, and
// a mock platform server implementing the token and session endpoints.
namespace coffeescan::keyval {

using nlohmann::json;
using protolab::MiniAppRegistration;

inline constexpr int kErrInvalidSecret = 40001;
inline constexpr int kErrInvalidGrant = 40002;
inline constexpr int kErrInvalidAppId = 40013;
inline constexpr int kErrInvalidCode = 40029;
inline constexpr int kErrRateLimited = 45011;

const char* errmsg(int errcode);

// ---- verdicts ---------------------------------------------------------------------

struct Verdict {
  enum class Kind { Valid, Invalid, Indeterminate };

  Kind kind = Kind::Indeterminate;
  std::string access_token;  // Valid
  int errcode = 0;           // Invalid
  std::string reason;        // Indeterminate

  static Verdict valid(std::string token) { return {Kind::Valid, std::move(token), 0, {}}; }
  static Verdict invalid(int code) { return {Kind::Invalid, {}, code, {}}; }
  static Verdict indeterminate(std::string why) { return {Kind::Indeterminate, {}, 0, std::move(why)}; }
};

const char* to_string(Verdict::Kind kind);
json to_json(const Verdict& v);

// ---- rate limiting ----------------------------------------------------------------

using Clock = std::chrono::steady_clock;

class LimiterClock {
 public:
  virtual ~LimiterClock() = default;
  virtual Clock::time_point now() = 0;
  virtual void sleep_until(Clock::time_point t) = 0;
};

class SystemLimiterClock final : public LimiterClock {
 public:
  Clock::time_point now() override { return Clock::now(); }
  void sleep_until(Clock::time_point t) override { std::this_thread::sleep_until(t); }
};

/// Sleeping advances the clock instantly.
class FakeLimiterClock final : public LimiterClock {
 public:
  Clock::time_point now() override;
  void sleep_until(Clock::time_point t) override;
  void advance(Clock::duration d);

 private:
  std::mutex mu_;
  Clock::time_point now_{};
};

struct RateLimitPolicy {
  std::size_t max_requests = 60;  // per window; 0 = unlimited
  Clock::duration window = std::chrono::seconds(60);
  std::size_t max_concurrent = 4;  // 0 = unlimited

  static RateLimitPolicy unlimited() { return {0, std::chrono::seconds(60), 0}; }
};

/// Sliding-window limiter with a concurrency cap. Callers block until both
/// allow another request. Thread-safe.
class RateLimiter {
 public:
  explicit RateLimiter(RateLimitPolicy policy = {}, std::shared_ptr<LimiterClock> clock = nullptr);

  class Permit {
   public:
    Permit() = default;
    explicit Permit(RateLimiter* owner) : owner_(owner) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Permit& operator=(Permit&& other) noexcept;
    ~Permit();

   private:
    RateLimiter* owner_ = nullptr;
  };

  Permit acquire();
  const RateLimitPolicy& policy() const { return policy_; }
  LimiterClock& clock() { return *clock_; }
  /// Times at which permits were granted.
  std::vector<Clock::time_point> grants() const;

 private:
  void release();

  RateLimitPolicy policy_;
  std::shared_ptr<LimiterClock> clock_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::deque<Clock::time_point> recent_;
  std::vector<Clock::time_point> grants_;
};

/// True when no window of the given length holds more than max timestamps.
bool respects_limit(std::vector<Clock::time_point> times, std::size_t max, Clock::duration window);

// ---- client -----------------------------------------------------------------------

struct ClientOptions {
  bool baidu = false;
  std::chrono::milliseconds timeout{2000};
  Clock::duration backoff = std::chrono::seconds(1);
};

class ValidationClient {
 public:
  ValidationClient(std::string endpoint, std::shared_ptr<RateLimiter> limiter, ClientOptions options = {});

  /// Asks the token endpoint; retries once on a rate-limit answer.
  Verdict validate(const std::string& app_id, const std::string& candidate);
  std::size_t requests_sent() const { return sent_; }

 private:
  std::optional<Verdict> attempt(const std::string& app_id, const std::string& candidate);

  std::string endpoint_;
  std::shared_ptr<RateLimiter> limiter_;
  ClientOptions options_;
  std::atomic<std::size_t> sent_{0};
};

/// Endpoint from the flag, else COFFEESCAN_ENDPOINT, else nullopt.
std::optional<std::string> resolve_endpoint(const std::optional<std::string>& flag);

// ---- mock server ------------------------------------------------------------------

struct MockOptions {
  std::uint64_t seed = 1;
  /// Server-side quota on token requests; 0 disables.
  std::size_t quota_per_window = 0;
  std::chrono::seconds quota_window{60};
  /// Seconds since server start; defaults to the steady clock.
  std::function<std::int64_t()> now;
};

struct MockSeed {
  std::vector<MiniAppRegistration> registrations;
  std::vector<std::string> users;
};

/// {"registrations": [...], "users": [...]} or a bare registration array.
MockSeed parse_seed(const json& j);
json to_json(const MockSeed& seed);

/// Request handling without the network: path plus query parameters to a
/// JSON body. Thread-safe.
class MockPlatform {
 public:
  explicit MockPlatform(MockSeed seed = {}, MockOptions options = {});

  void add_registration(MiniAppRegistration reg);
  void add_user(const std::string& user);
  /// The next n token requests answer 45011.
  void throttle_next(std::size_t n);

  /// nullopt for unknown paths.
  std::optional<json> handle(const std::string& path, const std::map<std::string, std::string>& params);

  std::size_t token_requests() const;

 private:
  json token(const std::string& app_id, const std::string& secret, bool baidu);
  json session(const std::map<std::string, std::string>& params);
  json login(const std::map<std::string, std::string>& params);
  std::int64_t now() const;

  mutable std::mutex mu_;
  MockOptions options_;
  protolab::SimClock sim_;
  protolab::Rng rng_;
  protolab::Platform platform_;
  Clock::time_point started_ = Clock::now();
  std::size_t throttle_ = 0;
  std::size_t token_requests_ = 0;
  std::deque<std::int64_t> quota_;
};

json error_body(int errcode);

/// HTTP front for MockPlatform on a background thread.
class MockServer {
 public:
  explicit MockServer(std::shared_ptr<MockPlatform> platform);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and starts serving; port 0 picks a free port. Throws on failure.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread. Returns false if binding fails.
  bool run(const std::string& host, int port, const std::function<void(int)>& on_bound = {});
  void stop();

  std::string url() const;
  int port() const { return port_; }
  MockPlatform& platform() { return *platform_; }
  /// Arrival times of every request, in order.
  std::vector<Clock::time_point> arrivals() const;

 private:
  struct Impl;
  std::shared_ptr<MockPlatform> platform_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace coffeescan::keyval
