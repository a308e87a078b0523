#include <httplib.h>

#include "coffeescan/keyval.hpp"

namespace coffeescan::keyval {

using protolab::LabErrc;
using protolab::LabError;

json error_body(int errcode) { return {{"errcode", errcode}, {"errmsg", errmsg(errcode)}}; }

MockSeed parse_seed(const json& j) {
  MockSeed seed;
  const json* regs = &j;
  if (j.is_object()) {
    if (!j.contains("registrations")) throw std::invalid_argument("seed: missing \"registrations\"");
    regs = &j["registrations"];
    if (j.contains("users")) seed.users = j["users"].get<std::vector<std::string>>();
  }
  if (!regs->is_array()) throw std::invalid_argument("seed: registrations must be an array");
  for (const json& r : *regs) {
    MiniAppRegistration reg;
    reg.app_id = r.at("app_id").get<std::string>();
    reg.master_key = r.at("master_key").get<std::string>();
    if (r.contains("enabled_services")) {
      reg.enabled_services = r["enabled_services"].get<std::set<std::string>>();
    }
    seed.registrations.push_back(std::move(reg));
  }
  return seed;
}

json to_json(const MockSeed& seed) {
  json regs = json::array();
  for (const auto& r : seed.registrations) {
    regs.push_back({{"app_id", r.app_id}, {"master_key", r.master_key}, {"enabled_services", r.enabled_services}});
  }
  return {{"registrations", regs}, {"users", seed.users}};
}

MockPlatform::MockPlatform(MockSeed seed, MockOptions options)
    : options_(std::move(options)), rng_(options_.seed), platform_(sim_, rng_) {
  for (auto& r : seed.registrations) platform_.register_app(std::move(r));
  for (const auto& u : seed.users) platform_.register_user(u);
}

void MockPlatform::add_registration(MiniAppRegistration reg) {
  std::lock_guard lk(mu_);
  platform_.register_app(std::move(reg));
}

void MockPlatform::add_user(const std::string& user) {
  std::lock_guard lk(mu_);
  platform_.register_user(user);
}

void MockPlatform::throttle_next(std::size_t n) {
  std::lock_guard lk(mu_);
  throttle_ = n;
}

std::size_t MockPlatform::token_requests() const {
  std::lock_guard lk(mu_);
  return token_requests_;
}

std::int64_t MockPlatform::now() const {
  if (options_.now) return options_.now();
  return std::chrono::duration_cast<std::chrono::seconds>(Clock::now() - started_).count();
}

namespace {

std::string get(const std::map<std::string, std::string>& params, const char* key) {
  auto it = params.find(key);
  return it == params.end() ? std::string() : it->second;
}

}  // namespace

std::optional<json> MockPlatform::handle(const std::string& path,
                                         const std::map<std::string, std::string>& params) {
  std::lock_guard lk(mu_);
  sim_.set(now());
  if (path == "/cgi-bin/token") {
    if (get(params, "grant_type") != "client_credential") return error_body(kErrInvalidGrant);
    return token(get(params, "appid"), get(params, "secret"), false);
  }
  if (path == "/oauth/2.0/token") {
    if (get(params, "grant_type") != "client_credentials") return error_body(kErrInvalidGrant);
    return token(get(params, "client_id"), get(params, "client_secret"), true);
  }
  if (path == "/sns/jscode2session") return session(params);
  if (path == "/lab/login") return login(params);
  return std::nullopt;
}

json MockPlatform::token(const std::string& app_id, const std::string& secret, bool /*baidu*/) {
  ++token_requests_;
  if (throttle_ > 0) {
    --throttle_;
    return error_body(kErrRateLimited);
  }
  if (options_.quota_per_window > 0) {
    const std::int64_t t = sim_.now();
    while (!quota_.empty() && quota_.front() <= t - options_.quota_window.count()) quota_.pop_front();
    if (quota_.size() >= options_.quota_per_window) return error_body(kErrRateLimited);
    quota_.push_back(t);
  }
  try {
    const protolab::AccessToken at = platform_.ws_get_access_token(app_id, secret);
    return {{"access_token", at.hex()}, {"expires_in", protolab::kAccessTokenTtl - (sim_.now() - at.issued_at)}};
  } catch (const LabError& e) {
    return error_body(e.code() == LabErrc::UnknownApp ? kErrInvalidAppId : kErrInvalidSecret);
  }
}

json MockPlatform::session(const std::map<std::string, std::string>& params) {
  if (get(params, "grant_type") != "authorization_code") return error_body(kErrInvalidGrant);
  try {
    auto [openid, ek] = platform_.ws_code2session(get(params, "appid"), get(params, "secret"),
                                                  get(params, "js_code"));
    return {{"openid", openid}, {"session_key", crypto::base64_encode(ek.key)}};
  } catch (const LabError& e) {
    switch (e.code()) {
      case LabErrc::UnknownApp: return error_body(kErrInvalidAppId);
      case LabErrc::InvalidMK: return error_body(kErrInvalidSecret);
      default: return error_body(kErrInvalidCode);
    }
  }
}

json MockPlatform::login(const std::map<std::string, std::string>& params) {
  try {
    const protolab::LoginToken lt = platform_.ws_login(get(params, "user"), get(params, "appid"));
    return {{"code", lt.code}, {"expires_in", protolab::kLoginTokenTtl}};
  } catch (const LabError& e) {
    return error_body(e.code() == LabErrc::UnknownApp ? kErrInvalidAppId : kErrInvalidCode);
  }
}

// ---- http -----------------------------------------------------------------------

struct MockServer::Impl {
  httplib::Server svr;
  mutable std::mutex mu;
  std::vector<Clock::time_point> arrivals;
};

MockServer::MockServer(std::shared_ptr<MockPlatform> platform)
    : platform_(std::move(platform)), impl_(std::make_unique<Impl>()) {
  // no SO_REUSEPORT: a busy port must fail to bind
  impl_->svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  impl_->svr.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lk(impl_->mu);
      impl_->arrivals.push_back(Clock::now());
    }
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params.emplace(k, v);
    if (auto body = platform_->handle(req.path, params)) {
      res.set_content(body->dump(), "application/json");
    } else {
      res.status = 404;
      res.set_content(json{{"errcode", 404}, {"errmsg", "no such endpoint"}}.dump(), "application/json");
    }
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->svr.bind_to_any_port(host);
  } else {
    port_ = impl_->svr.bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
  return port_;
}

bool MockServer::run(const std::string& host, int port, const std::function<void(int)>& on_bound) {
  host_ = host;
  port_ = port == 0 ? impl_->svr.bind_to_any_port(host) : (impl_->svr.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) return false;
  if (on_bound) on_bound(port_);
  return impl_->svr.listen_after_bind();
}

void MockServer::stop() {
  impl_->svr.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

std::vector<Clock::time_point> MockServer::arrivals() const {
  std::lock_guard lk(impl_->mu);
  return impl_->arrivals;
}

}  // namespace coffeescan::keyval
