#include <cstdlib>

#include <httplib.h>

#include "coffeescan/keyval.hpp"

namespace coffeescan::keyval {

const char* errmsg(int errcode) {
  switch (errcode) {
    case kErrInvalidSecret: return "invalid appsecret";
    case kErrInvalidGrant: return "invalid grant_type";
    case kErrInvalidAppId: return "invalid appid";
    case kErrInvalidCode: return "invalid code";
    case kErrRateLimited: return "api minute-quota reach limit";
  }
  return "unknown error";
}

const char* to_string(Verdict::Kind kind) {
  switch (kind) {
    case Verdict::Kind::Valid: return "Valid";
    case Verdict::Kind::Invalid: return "Invalid";
    case Verdict::Kind::Indeterminate: return "Indeterminate";
  }
  return "?";
}

json to_json(const Verdict& v) {
  json j = {{"verdict", to_string(v.kind)}};
  if (v.kind == Verdict::Kind::Invalid) j["errcode"] = v.errcode;
  if (v.kind == Verdict::Kind::Indeterminate) j["reason"] = v.reason;
  return j;
}

ValidationClient::ValidationClient(std::string endpoint, std::shared_ptr<RateLimiter> limiter,
                                   ClientOptions options)
    : endpoint_(std::move(endpoint)),
      limiter_(limiter ? std::move(limiter) : std::make_shared<RateLimiter>()),
      options_(options) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

// nullopt means rate limited.
std::optional<Verdict> ValidationClient::attempt(const std::string& app_id, const std::string& candidate) {
  auto permit = limiter_->acquire();
  httplib::Client cli(endpoint_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  httplib::Params params;
  std::string path;
  if (options_.baidu) {
    path = "/oauth/2.0/token";
    params = {{"grant_type", "client_credentials"}, {"client_id", app_id}, {"client_secret", candidate}};
  } else {
    path = "/cgi-bin/token";
    params = {{"grant_type", "client_credential"}, {"appid", app_id}, {"secret", candidate}};
  }
  ++sent_;
  auto res = cli.Get(path, params, httplib::Headers{});
  if (!res) return Verdict::indeterminate(httplib::to_string(res.error()));
  if (res->status == 429) return std::nullopt;
  if (res->status != 200) return Verdict::indeterminate("http " + std::to_string(res->status));
  const json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return Verdict::indeterminate("malformed body");
  if (body.contains("access_token") && body["access_token"].is_string()) {
    return Verdict::valid(body["access_token"].get<std::string>());
  }
  if (body.contains("errcode") && body["errcode"].is_number_integer()) {
    const int code = body["errcode"].get<int>();
    if (code == kErrRateLimited) return std::nullopt;
    return Verdict::invalid(code);
  }
  return Verdict::indeterminate("unexpected body");
}

Verdict ValidationClient::validate(const std::string& app_id, const std::string& candidate) {
  if (auto v = attempt(app_id, candidate)) return *v;
  limiter_->clock().sleep_until(limiter_->clock().now() + options_.backoff);
  if (auto v = attempt(app_id, candidate)) return *v;
  return Verdict::indeterminate("rate limited");
}

std::optional<std::string> resolve_endpoint(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return flag;
  if (const char* env = std::getenv("COFFEESCAN_ENDPOINT"); env && *env) return std::string(env);
  return std::nullopt;
}

}  // namespace coffeescan::keyval
