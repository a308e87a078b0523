#include <functional>
#include <memory>
#include <variant>

#include "coffeescan/protolab.hpp"

namespace coffeescan::protolab {

// ---- transcript ---------------------------------------------------------------------

void Transcript::add(const SimClock& clock, std::string step, std::string actor, std::string op,
                     std::string outcome, json detail) {
  TranscriptEvent e;
  e.seq = events_.size() + 1;
  e.t = clock.now();
  e.step = std::move(step);
  e.actor = std::move(actor);
  e.op = std::move(op);
  e.outcome = std::move(outcome);
  e.detail = std::move(detail);
  events_.push_back(std::move(e));
}

json to_json(const TranscriptEvent& e) {
  return {{"seq", e.seq},  {"t", e.t},           {"step", e.step},    {"actor", e.actor},
          {"op", e.op},    {"outcome", e.outcome}, {"detail", e.detail}};
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

// ---- scenario specs -----------------------------------------------------------------

namespace {

const char* leak_name(Leak l) {
  switch (l) {
    case Leak::None: return "none";
    case Leak::MK: return "mk";
    case Leak::EK: return "ek";
  }
  return "?";
}

const char* defense_name(Defense d) { return d == Defense::None ? "none" : "integrity"; }

}  // namespace

ScenarioSpec parse_scenario(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");
  ScenarioSpec spec;
  if (!j.contains("scenario") || !j["scenario"].is_string()) {
    throw std::invalid_argument("missing \"scenario\"");
  }
  spec.scenario = j["scenario"].get<std::string>();
  if (j.contains("leak")) {
    const std::string l = j["leak"].get<std::string>();
    if (l == "none") spec.leak = Leak::None;
    else if (l == "mk") spec.leak = Leak::MK;
    else if (l == "ek") spec.leak = Leak::EK;
    else throw std::invalid_argument("unknown leak: " + l);
  }
  if (j.contains("defense")) {
    const std::string d = j["defense"].get<std::string>();
    if (d == "none") spec.defense = Defense::None;
    else if (d == "integrity") spec.defense = Defense::Integrity;
    else throw std::invalid_argument("unknown defense: " + d);
  }
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("expect")) spec.expect = j["expect"].get<std::string>();
  for (const auto& [key, value] : j.items()) {
    if (key != "scenario" && key != "leak" && key != "defense" && key != "seed" && key != "expect") {
      spec.params[key] = value;
    }
  }
  return spec;
}

json to_json(const ScenarioSpec& spec) {
  json j = spec.params;
  j["scenario"] = spec.scenario;
  j["leak"] = leak_name(spec.leak);
  j["defense"] = defense_name(spec.defense);
  j["seed"] = spec.seed;
  if (spec.expect) j["expect"] = *spec.expect;
  return j;
}

// ---- the simulated world ------------------------------------------------------------

namespace {

template <typename T>
T param(const ScenarioSpec& spec, const char* key, T fallback) {
  return spec.params.contains(key) ? spec.params[key].get<T>() : fallback;
}

struct World {
  SimClock clock;
  Rng rng;
  Platform platform;
  std::string app_id;
  std::string mk;
  std::unique_ptr<Backend> backend;
  Transcript transcript;
  const ScenarioSpec& spec;

  explicit World(const ScenarioSpec& s)
      : rng(s.seed),
        platform(clock, rng,
                 PlatformOptions{param<std::int64_t>(s, "ek_ttl", kEncryptionKeyTtl),
                                 s.defense == Defense::Integrity}),
        spec(s) {
    app_id = "wx" + rng.hex(16);
    mk = rng.hex(32);
    std::set<std::string> services = {"openapi.ocr.idCard", "jokebot", "geoc"};
    if (s.params.contains("enabled_services")) {
      services = s.params["enabled_services"].get<std::set<std::string>>();
    }
    platform.register_app({app_id, mk, services});
    for (const char* user : {"attacker", "victim"}) platform.register_user(user);
    platform.set_record("attacker", {RecordKind::PhoneNumber, {{"phoneNumber", kAttackerPhone}}});
    platform.set_record("victim", {RecordKind::PhoneNumber, {{"phoneNumber", kVictimPhone}}});
    platform.set_record("attacker", {RecordKind::WeRunData,
                                     {{"stepInfoList", json::array({{{"timestamp", 1600000000}, {"step", 0}}})}}});
    platform.set_record("attacker", {RecordKind::ShareInfo, {{"openGId", "G" + rng.hex(27)}}});
    platform.set_record("attacker", {RecordKind::UserInfo,
                                     {{"nickName", "eve"}, {"gender", 1}, {"avatarUrl", "/a.png"}}});
    backend = std::make_unique<Backend>(platform, app_id, mk,
                                        BackendOptions{s.defense == Defense::Integrity});
    backend->add_account(kAttackerPhone, "attacker-account");
    backend->add_account(kVictimPhone, "victim-account");
  }

  void event(std::string step, std::string actor, std::string op, std::string outcome,
             json detail = json::object()) {
    transcript.add(clock, std::move(step), std::move(actor), std::move(op), std::move(outcome),
                   std::move(detail));
  }

  // The master key as known to the attacker.
  std::string attacker_mk() {
    if (spec.leak == Leak::MK) return mk;
    return rng.hex(32);  // a guess
  }

  // Honest front-end login: LT from the platform, exchanged by the back-end.
  std::string backend_login(const std::string& user, const std::string& step) {
    const LoginToken lt = platform.ws_login(user, app_id);
    const std::string openid = backend->login(lt.code);
    event(step, user, "backend.login", "ok", {{"openid", openid}});
    return openid;
  }
};

struct Blocked {
  std::string step;
  std::string reason;
};

ScenarioResult finish(World& w, std::string outcome, json summary) {
  w.event("result", "lab", w.spec.scenario, outcome, summary);
  ScenarioResult r;
  r.outcome = std::move(outcome);
  r.transcript = std::move(w.transcript);
  r.summary = std::move(summary);
  return r;
}

ScenarioResult blocked(World& w, const Blocked& b, json summary = json::object()) {
  summary["blocked_at"] = b.step;
  summary["reason"] = b.reason;
  return finish(w, "blocked", std::move(summary));
}

// Steps 1-3: the attacker's own LT exchanged for their EK. With leak=ek and
// use_getter the EK comes from the back-end's session-key getter instead.
std::variant<EncryptionKey, Blocked> attacker_ek(World& w, bool use_getter = true) {
  const LoginToken lt = w.platform.ws_login("attacker", w.app_id);
  w.event("1", "attacker", "ws_login", "ok", {{"code", lt.code}});
  if (use_getter && w.spec.leak == Leak::EK) {
    const std::string openid = w.backend->login(lt.code);
    const auto ek = w.backend->session_key_getter(openid);
    w.event("2", "attacker", "session_key_getter", "ok", {{"openid", openid}});
    w.event("3", "backend", "return_session_key", "ok", {{"session_key", crypto::base64_encode(ek->key)}});
    return *ek;
  }
  try {
    auto [openid, ek] = w.platform.ws_code2session(w.app_id, w.attacker_mk(), lt.code);
    w.event("2", "attacker", "ws_code2session", "ok", {{"openid", openid}});
    w.event("3", "platform", "issue_ek", "ok", {{"session_key", crypto::base64_encode(ek.key)}});
    return ek;
  } catch (const LabError& e) {
    w.event("2", "attacker", "ws_code2session", "rejected", {{"error", to_string(e.code())}});
    return Blocked{"2", to_string(e.code())};
  }
}

// Steps 4-5: fetch the attacker's own envelope and open it.
std::pair<Envelope, SensitiveRecord> fetch_and_open(World& w, const EncryptionKey& ek, RecordKind kind) {
  const Envelope env = w.platform.ws_fetch_encrypted("attacker", w.app_id, kind);
  w.event("4", "attacker", "ws_fetch_encrypted", "ok",
          {{"kind", to_string(kind)}, {"iv", env.iv}, {"signed", env.signature.has_value()}});
  auto record = open(ek.key, kind, env);
  w.event("5", "attacker", "decrypt", record ? "ok" : "failed",
          record ? record->payload : json::object());
  if (!record) throw LabError(LabErrc::DecryptFailure, "attacker could not open own envelope");
  return {env, *record};
}

// Step 7: re-encrypt under the same EK. The original signature is carried
// over since the attacker cannot compute a new one.
Envelope forge(World& w, const EncryptionKey& ek, const SensitiveRecord& record, const Envelope& original) {
  Envelope forged = seal(ek, record, w.rng);
  forged.signature = original.signature;
  w.event("7", "attacker", "encrypt", "ok", {{"iv", forged.iv}});
  return forged;
}

// Needs the MK itself: steps 1-3 go through ws_code2session.
ScenarioResult hijack(World& w) {
  auto ek = attacker_ek(w, false);
  if (auto* b = std::get_if<Blocked>(&ek)) return blocked(w, *b);
  const EncryptionKey& key = std::get<EncryptionKey>(ek);

  auto [env, record] = fetch_and_open(w, key, RecordKind::PhoneNumber);
  const std::string victim = param<std::string>(w.spec, "victim_phone", kVictimPhone);
  record.payload["phoneNumber"] = victim;
  w.event("6", "attacker", "replace_phone", "ok", {{"from", kAttackerPhone}, {"to", victim}});
  const Envelope forged = forge(w, key, record, env);

  const std::string openid = w.backend_login("attacker", "8");
  try {
    const auto account = w.backend->phone_login(openid, forged);
    w.event("8", "backend", "phone_login", account ? "ok" : "rejected",
            {{"account", account ? json(*account) : json(nullptr)}});
    if (account && *account == "victim-account") {
      return finish(w, "success", {{"account", *account}});
    }
    return blocked(w, {"8", "no such account"});
  } catch (const LabError& e) {
    w.event("8", "backend", "phone_login", "rejected", {{"error", to_string(e.code())}});
    return blocked(w, {"8", to_string(e.code())});
  }
}

ScenarioResult promotion(World& w) {
  const std::string variant = param<std::string>(w.spec, "variant", "werun");
  if (variant != "werun" && variant != "share") throw std::invalid_argument("unknown variant: " + variant);
  auto ek = attacker_ek(w);
  if (auto* b = std::get_if<Blocked>(&ek)) return blocked(w, *b, {{"variant", variant}});
  const EncryptionKey& key = std::get<EncryptionKey>(ek);
  const std::string openid = w.backend_login("attacker", "8");

  if (variant == "werun") {
    auto [env, record] = fetch_and_open(w, key, RecordKind::WeRunData);
    const std::int64_t step = param<std::int64_t>(w.spec, "step", 100000);
    record.payload["stepInfoList"].back()["step"] = step;
    w.event("6", "attacker", "set_step", "ok", {{"step", step}});
    const Envelope forged = forge(w, key, record, env);
    try {
      const std::int64_t points = w.backend->redeem_steps(openid, forged);
      w.event("8", "backend", "redeem_steps", "ok", {{"step", step}, {"points", points}});
      return finish(w, "success", {{"variant", variant}, {"step", step}, {"points", points}});
    } catch (const LabError& e) {
      w.event("8", "backend", "redeem_steps", "rejected", {{"error", to_string(e.code())}});
      return blocked(w, {"8", to_string(e.code())}, {{"variant", variant}});
    }
  }

  auto [env, record] = fetch_and_open(w, key, RecordKind::ShareInfo);
  const std::int64_t k = param<std::int64_t>(w.spec, "groups", 10);
  json awards = json::array();
  std::int64_t total = 0;
  std::string last_group;
  try {
    for (std::int64_t i = 0; i < k; ++i) {
      last_group = "G" + w.rng.hex(27);
      record.payload["openGId"] = last_group;
      w.event("6", "attacker", "set_open_gid", "ok", {{"openGId", last_group}});
      const std::int64_t cents = w.backend->redeem_share(openid, forge(w, key, record, env), w.rng);
      w.event("8", "backend", "redeem_share", cents > 0 ? "ok" : "denied", {{"cents", cents}});
      awards.push_back(cents);
      total += cents;
    }
    bool duplicate_denied = true;
    if (k > 0) {
      const std::int64_t again = w.backend->redeem_share(openid, forge(w, key, record, env), w.rng);
      w.event("8", "backend", "redeem_share", again > 0 ? "ok" : "denied",
              {{"openGId", last_group}, {"cents", again}, {"duplicate", true}});
      duplicate_denied = again == 0;
    }
    json summary = {{"variant", variant}, {"awards", awards}, {"total_cents", total},
                    {"duplicate_denied", duplicate_denied}};
    return finish(w, total > 0 ? "success" : "blocked", summary);
  } catch (const LabError& e) {
    w.event("8", "backend", "redeem_share", "rejected", {{"error", to_string(e.code())}});
    return blocked(w, {"8", to_string(e.code())}, {{"variant", variant}, {"awards", awards}});
  }
}

ScenarioResult service_theft(World& w) {
  const std::string service = param<std::string>(w.spec, "service", "openapi.ocr.idCard");
  const std::uint64_t n = param<std::uint64_t>(w.spec, "n", 1000);
  if (w.spec.leak == Leak::EK) {
    w.event("1", "attacker", "ws_get_access_token", "rejected", {{"error", "no master key"}});
    return blocked(w, {"1", "no master key"}, {{"cost", 0.0}});
  }
  AccessToken at;
  try {
    at = w.platform.ws_get_access_token(w.app_id, w.attacker_mk());
    w.event("1", "attacker", "ws_get_access_token", "ok", {{"expires_in", kAccessTokenTtl}});
  } catch (const LabError& e) {
    w.event("1", "attacker", "ws_get_access_token", "rejected", {{"error", to_string(e.code())}});
    return blocked(w, {"1", to_string(e.code())}, {{"cost", 0.0}});
  }
  try {
    if (n > 0) w.platform.ws_invoke_service(at.hex(), service, json::object(), n);
    const double cost = w.platform.ledger().cost(w.app_id);
    w.event("2", "attacker", "ws_invoke_service", "ok", {{"service", service}, {"n", n}, {"cost", cost}});
    return finish(w, "success", {{"service", service}, {"n", n}, {"cost", cost}});
  } catch (const LabError& e) {
    w.event("2", "attacker", "ws_invoke_service", "rejected", {{"error", to_string(e.code())}});
    return blocked(w, {"2", to_string(e.code())}, {{"cost", w.platform.ledger().cost(w.app_id)}});
  }
}

ScenarioResult replay(World& w) {
  const std::int64_t delay = param<std::int64_t>(w.spec, "delay", 301);
  const std::string openid = w.backend_login("victim", "1");
  const Envelope env = w.platform.ws_fetch_encrypted("victim", w.app_id, RecordKind::PhoneNumber);
  w.event("2", "victim", "ws_fetch_encrypted", "ok", {{"iv", env.iv}});
  const auto account = w.backend->phone_login(openid, env);
  w.event("3", "backend", "phone_login", "ok", {{"account", *account}});
  w.event("4", "attacker", "capture", "ok", {{"iv", env.iv}});
  w.clock.advance(delay);
  try {
    const auto again = w.backend->phone_login(openid, env);
    w.event("5", "attacker", "replay", "ok", {{"account", again ? json(*again) : json(nullptr)}});
    return finish(w, "success", {{"delay", delay}});
  } catch (const LabError& e) {
    w.event("5", "attacker", "replay", "rejected", {{"error", to_string(e.code())}});
    return blocked(w, {"5", to_string(e.code())}, {{"delay", delay}});
  }
}

ScenarioResult lt_expiry(World& w) {
  const std::int64_t delay = param<std::int64_t>(w.spec, "delay", 301);
  bool expired_rejected = false, reuse_rejected = false;

  const LoginToken old = w.platform.ws_login("victim", w.app_id);
  w.event("1", "victim", "ws_login", "ok", {{"code", old.code}});
  w.clock.advance(delay);
  try {
    w.backend->login(old.code);
    w.event("2", "backend", "ws_code2session", "ok", {{"age", delay}});
  } catch (const LabError& e) {
    expired_rejected = e.code() == LabErrc::InvalidLT;
    w.event("2", "backend", "ws_code2session", "rejected", {{"age", delay}, {"error", to_string(e.code())}});
  }

  const LoginToken fresh = w.platform.ws_login("victim", w.app_id);
  w.event("3", "victim", "ws_login", "ok", {{"code", fresh.code}});
  w.backend->login(fresh.code);
  w.event("4", "backend", "ws_code2session", "ok", {{"use", 1}});
  try {
    w.backend->login(fresh.code);
    w.event("5", "backend", "ws_code2session", "ok", {{"use", 2}});
  } catch (const LabError& e) {
    reuse_rejected = e.code() == LabErrc::InvalidLT;
    w.event("5", "backend", "ws_code2session", "rejected", {{"use", 2}, {"error", to_string(e.code())}});
  }
  json summary = {{"delay", delay}, {"expired_rejected", expired_rejected}, {"reuse_rejected", reuse_rejected}};
  return finish(w, expired_rejected && reuse_rejected ? "blocked" : "success", summary);
}

ScenarioResult at_expiry(World& w) {
  const std::int64_t delay = param<std::int64_t>(w.spec, "delay", 7201);
  const AccessToken at = w.platform.ws_get_access_token(w.app_id, w.mk);
  const AccessToken again = w.platform.ws_get_access_token(w.app_id, w.mk);
  w.event("1", "backend", "ws_get_access_token", "ok", {{"cached", at.token == again.token}});
  w.platform.ws_invoke_service(at.hex(), "jokebot", json::object());
  w.event("2", "backend", "ws_invoke_service", "ok", {{"age", 0}});
  w.clock.advance(delay);
  json summary = {{"delay", delay}, {"cached", at.token == again.token}};
  try {
    w.platform.ws_invoke_service(at.hex(), "jokebot", json::object());
    w.event("3", "backend", "ws_invoke_service", "ok", {{"age", delay}});
    return finish(w, "success", summary);
  } catch (const LabError& e) {
    w.event("3", "backend", "ws_invoke_service", "rejected", {{"age", delay}, {"error", to_string(e.code())}});
    const AccessToken renewed = w.platform.ws_get_access_token(w.app_id, w.mk);
    summary["renewed_differs"] = renewed.token != at.token;
    w.event("4", "backend", "ws_get_access_token", "ok", {{"renewed", renewed.token != at.token}});
    summary["error"] = to_string(e.code());
    return finish(w, "blocked", summary);
  }
}

ScenarioResult same_ek(World& w) {
  const std::int64_t delay = param<std::int64_t>(w.spec, "delay", 10);
  const LoginToken first = w.platform.ws_login("victim", w.app_id);
  auto [openid, ek1] = w.platform.ws_code2session(w.app_id, w.mk, first.code);
  w.event("1", "backend", "ws_code2session", "ok", {{"session_key", crypto::base64_encode(ek1.key)}});
  w.clock.advance(delay);
  const LoginToken second = w.platform.ws_login("victim", w.app_id);
  const char* actor = w.spec.leak == Leak::MK ? "attacker" : "backend";
  auto [openid2, ek2] = w.platform.ws_code2session(w.app_id, w.mk, second.code);
  w.event("2", actor, "ws_code2session", "ok", {{"session_key", crypto::base64_encode(ek2.key)}});
  const bool same = ek1.key == ek2.key;
  return finish(w, same ? "same" : "different",
                {{"delay", delay}, {"distinct_tokens", first.code != second.code}, {"same", same}});
}

const std::map<std::string, std::function<ScenarioResult(World&)>>& registry() {
  static const std::map<std::string, std::function<ScenarioResult(World&)>> r = {
      {"hijack", hijack},       {"promotion", promotion}, {"service_theft", service_theft},
      {"replay", replay},       {"lt_expiry", lt_expiry}, {"at_expiry", at_expiry},
      {"same_ek", same_ek}};
  return r;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

ScenarioResult run_scenario(const ScenarioSpec& spec) {
  auto it = registry().find(spec.scenario);
  if (it == registry().end()) throw std::invalid_argument("unknown scenario: " + spec.scenario);
  World w(spec);
  w.event("0", "lab", "setup", "ok",
          {{"scenario", spec.scenario}, {"leak", leak_name(spec.leak)},
           {"defense", defense_name(spec.defense)}, {"seed", spec.seed}, {"app_id", w.app_id}});
  return it->second(w);
}

}  // namespace coffeescan::protolab
