#include <algorithm>

#include "coffeescan/protolab.hpp"

namespace coffeescan::protolab {

// ---- rng ----------------------------------------------------------------------------

Bytes Rng::bytes(std::size_t n) {
  Bytes out(n);
  for (std::size_t i = 0; i < n; i += 8) {
    std::uint64_t v = engine_();
    for (std::size_t k = 0; k < 8 && i + k < n; ++k) {
      out[i + k] = static_cast<std::uint8_t>(v);
      v >>= 8;
    }
  }
  return out;
}

std::string Rng::hex(std::size_t n_chars) {
  std::string s = crypto::hex_encode(bytes((n_chars + 1) / 2));
  s.resize(n_chars);
  return s;
}

std::int64_t Rng::uniform(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform: empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % range);
}

// ---- records and envelopes ----------------------------------------------------------

const char* to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::PhoneNumber: return "PhoneNumber";
    case RecordKind::UserInfo: return "UserInfo";
    case RecordKind::WeRunData: return "WeRunData";
    case RecordKind::ShareInfo: return "ShareInfo";
  }
  return "?";
}

std::optional<RecordKind> parse_record_kind(std::string_view name) {
  for (RecordKind k : {RecordKind::PhoneNumber, RecordKind::UserInfo, RecordKind::WeRunData,
                       RecordKind::ShareInfo}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

bool well_formed(const SensitiveRecord& record) {
  const json& p = record.payload;
  if (!p.is_object()) return false;
  switch (record.kind) {
    case RecordKind::PhoneNumber:
      return p.size() == 1 && p.contains("phoneNumber") && p["phoneNumber"].is_string();
    case RecordKind::ShareInfo:
      return p.size() == 1 && p.contains("openGId") && p["openGId"].is_string();
    case RecordKind::UserInfo:
      return p.size() == 3 && p.contains("nickName") && p.contains("gender") && p.contains("avatarUrl");
    case RecordKind::WeRunData: {
      if (p.size() != 1 || !p.contains("stepInfoList") || !p["stepInfoList"].is_array()) return false;
      return std::all_of(p["stepInfoList"].begin(), p["stepInfoList"].end(), [](const json& e) {
        return e.is_object() && e.size() == 2 && e.contains("timestamp") && e.contains("step") &&
               e["step"].is_number_integer();
      });
    }
  }
  return false;
}

namespace {

void put_field(Bytes& out, crypto::ByteView field) {
  const auto n = static_cast<std::uint32_t>(field.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
  out.insert(out.end(), field.begin(), field.end());
}

}  // namespace

Bytes signed_message(const std::string& app_id, crypto::ByteView iv, crypto::ByteView ciphertext) {
  Bytes out;
  put_field(out, crypto::as_bytes(app_id));
  put_field(out, iv);
  put_field(out, ciphertext);
  return out;
}

Envelope seal(const EncryptionKey& ek, const SensitiveRecord& record, Rng& rng) {
  const Bytes iv = rng.bytes(crypto::kAesBlockSize);
  const std::string plaintext = record.payload.dump();
  const Bytes ct = crypto::aes128_cbc_encrypt(ek.key, iv, crypto::as_bytes(plaintext));
  Envelope env;
  env.encrypted_data = crypto::base64_encode(ct);
  env.iv = crypto::base64_encode(iv);
  env.app_id = ek.app_id;
  env.user_id = ek.user_id;
  return env;
}

std::optional<SensitiveRecord> open(const Bytes& ek, RecordKind kind, const Envelope& envelope) {
  const auto iv = crypto::base64_decode(envelope.iv);
  const auto ct = crypto::base64_decode(envelope.encrypted_data);
  if (!iv || !ct || iv->size() != crypto::kAesBlockSize || ek.size() != crypto::kAesKeySize) {
    return std::nullopt;
  }
  const auto pt = crypto::aes128_cbc_decrypt(ek, *iv, *ct);
  if (!pt) return std::nullopt;
  SensitiveRecord record{kind, json::parse(pt->begin(), pt->end(), nullptr, false)};
  if (record.payload.is_discarded() || !well_formed(record)) return std::nullopt;
  return record;
}

// ---- catalog and ledger -------------------------------------------------------------

const std::vector<ServiceCatalogEntry>& default_catalog() {
  static const std::vector<ServiceCatalogEntry> catalog = {
      {"openapi.ocr.bankCard", 1000, false},
      {"openapi.ocr.businessLicense", 1000, false},
      {"openapi.ocr.driveLicense", 1000, false},
      {"openapi.ocr.idCard", 1000, false},
      {"openapi.ocr.plainText", 1000, false},
      {"openapi.ocr.vehicleLicense", 1000, false},
      {"openapi.ans_node_name", 0, true},
      {"goodclass2", 0, true},
      {"multilingualMT", 0, true},
      {"jokebot", 0, true},
      {"goodinfo", 0, true},
      {"weixinSecintelligenceresp", 0, true},
      {"weOpensecRiskservice", 5000, false},
      {"weOpenSecuseracctRiskLevel", 5000, false},
      {"poisearch", 260, false},
      {"geoc", 260, false},
      {"coordTrans", 260, false},
      {"poiSuggestion", 260, false},
  };
  return catalog;
}

void BillingLedger::record(const std::string& app_id, const ServiceCatalogEntry& service,
                           std::uint64_t count) {
  Line& line = lines_[app_id][service.name];
  line.count += count;
  line.price_per_million = service.price_per_million;
}

std::uint64_t BillingLedger::count(const std::string& app_id, const std::string& service) const {
  auto a = lines_.find(app_id);
  if (a == lines_.end()) return 0;
  auto s = a->second.find(service);
  return s == a->second.end() ? 0 : s->second.count;
}

double BillingLedger::cost(const std::string& app_id) const {
  auto a = lines_.find(app_id);
  if (a == lines_.end()) return 0;
  double total = 0;
  for (const auto& [name, line] : a->second) {
    total += static_cast<double>(line.count) * line.price_per_million / 1e6;
  }
  return total;
}

double BillingLedger::total_cost() const {
  double total = 0;
  for (const auto& [app, services] : lines_) total += cost(app);
  return total;
}

// ---- errors -------------------------------------------------------------------------

const char* to_string(LabErrc code) {
  switch (code) {
    case LabErrc::UnknownUser: return "UnknownUser";
    case LabErrc::UnknownApp: return "UnknownApp";
    case LabErrc::InvalidMK: return "InvalidMK";
    case LabErrc::InvalidLT: return "InvalidLT";
    case LabErrc::NoSuchRecord: return "NoSuchRecord";
    case LabErrc::IntegrityFailure: return "IntegrityFailure";
    case LabErrc::DecryptFailure: return "DecryptFailure";
    case LabErrc::AtExpired: return "AtExpired";
    case LabErrc::InvalidAT: return "InvalidAT";
    case LabErrc::ServiceDisabled: return "ServiceDisabled";
    case LabErrc::UnknownService: return "UnknownService";
  }
  return "?";
}

LabError::LabError(LabErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

// ---- platform -----------------------------------------------------------------------

Platform::Platform(SimClock& clock, Rng& rng, PlatformOptions options)
    : clock_(clock), rng_(rng), options_(options), integrity_key_(rng.bytes(32)) {
  for (const auto& s : default_catalog()) catalog_[s.name] = s;
}

void Platform::register_app(MiniAppRegistration app) {
  auto it = std::find_if(apps_.begin(), apps_.end(),
                         [&](const MiniAppRegistration& a) { return a.app_id == app.app_id; });
  if (it != apps_.end()) {
    *it = std::move(app);
  } else {
    apps_.push_back(std::move(app));
  }
}

void Platform::register_user(const std::string& user_id) { users_.insert(user_id); }

void Platform::set_record(const std::string& user_id, SensitiveRecord record) {
  if (!users_.count(user_id)) throw LabError(LabErrc::UnknownUser, user_id);
  const RecordKind kind = record.kind;
  records_[user_id][kind] = std::move(record);
}

const SensitiveRecord* Platform::record(const std::string& user_id, RecordKind kind) const {
  auto u = records_.find(user_id);
  if (u == records_.end()) return nullptr;
  auto r = u->second.find(kind);
  return r == u->second.end() ? nullptr : &r->second;
}

void Platform::add_service(ServiceCatalogEntry service) {
  const std::string name = service.name;
  catalog_[name] = std::move(service);
}

bool Platform::has_app(const std::string& app_id) const {
  return std::any_of(apps_.begin(), apps_.end(),
                     [&](const MiniAppRegistration& a) { return a.app_id == app_id; });
}

const MiniAppRegistration& Platform::app(const std::string& app_id) const {
  for (const auto& a : apps_) {
    if (a.app_id == app_id) return a;
  }
  throw LabError(LabErrc::UnknownApp, app_id);
}

std::string Platform::openid(const std::string& user_id, const std::string& app_id) {
  auto key = std::make_pair(user_id, app_id);
  auto it = openids_.find(key);
  if (it != openids_.end()) return it->second;
  std::string id = "o" + rng_.hex(27);
  openids_.emplace(key, id);
  return id;
}

std::optional<std::string> Platform::user_of(const std::string& openid) const {
  for (const auto& [key, id] : openids_) {
    if (id == openid) return key.first;
  }
  return std::nullopt;
}

LoginToken Platform::ws_login(const std::string& user_id, const std::string& app_id) {
  if (!users_.count(user_id)) throw LabError(LabErrc::UnknownUser, user_id);
  app(app_id);
  LoginToken lt;
  do {
    lt.code = rng_.hex(32);
  } while (tokens_.count(lt.code));
  lt.issued_at = clock_.now();
  lt.user_id = user_id;
  lt.app_id = app_id;
  tokens_[lt.code] = lt;
  return lt;
}

const EncryptionKey& Platform::current_ek(const std::string& user_id, const std::string& app_id) {
  auto key = std::make_pair(user_id, app_id);
  auto it = eks_.find(key);
  if (it == eks_.end() || !it->second.valid_at(clock_.now())) {
    EncryptionKey ek;
    ek.key = rng_.bytes(crypto::kAesKeySize);
    ek.issued_at = clock_.now();
    ek.user_id = user_id;
    ek.app_id = app_id;
    ek.ttl_seconds = options_.ek_ttl;
    it = eks_.insert_or_assign(key, std::move(ek)).first;
  }
  return it->second;
}

std::pair<std::string, EncryptionKey> Platform::ws_code2session(const std::string& app_id,
                                                                const std::string& mk,
                                                                const std::string& code) {
  const MiniAppRegistration& a = app(app_id);
  if (a.master_key != mk) throw LabError(LabErrc::InvalidMK, app_id);
  auto it = tokens_.find(code);
  if (it == tokens_.end()) throw LabError(LabErrc::InvalidLT, "unknown code");
  LoginToken& lt = it->second;
  if (lt.consumed) throw LabError(LabErrc::InvalidLT, "code already used");
  if (!lt.valid_at(clock_.now())) throw LabError(LabErrc::InvalidLT, "code expired");
  if (lt.app_id != app_id) throw LabError(LabErrc::InvalidLT, "code issued for another app");
  lt.consumed = true;
  return {openid(lt.user_id, app_id), current_ek(lt.user_id, app_id)};
}

Envelope Platform::ws_fetch_encrypted(const std::string& user_id, const std::string& app_id,
                                      RecordKind kind) {
  app(app_id);
  const SensitiveRecord* r = record(user_id, kind);
  if (!r) throw LabError(LabErrc::NoSuchRecord, user_id + "/" + to_string(kind));
  Envelope env = seal(current_ek(user_id, app_id), *r, rng_);
  if (options_.integrity) {
    const Bytes iv = *crypto::base64_decode(env.iv);
    const Bytes ct = *crypto::base64_decode(env.encrypted_data);
    env.signature = crypto::hmac_sha256(integrity_key_, signed_message(env.app_id, iv, ct));
  }
  return env;
}

bool Platform::check_encrypted_data(const Envelope& envelope) const {
  if (!envelope.signature) return false;
  const auto iv = crypto::base64_decode(envelope.iv);
  const auto ct = crypto::base64_decode(envelope.encrypted_data);
  if (!iv || !ct) return false;
  const Bytes mac = crypto::hmac_sha256(integrity_key_, signed_message(envelope.app_id, *iv, *ct));
  return crypto::constant_time_equal(mac, *envelope.signature);
}

AccessToken Platform::ws_get_access_token(const std::string& app_id, const std::string& mk) {
  const MiniAppRegistration& a = app(app_id);
  if (a.master_key != mk) throw LabError(LabErrc::InvalidMK, app_id);
  auto it = ats_.find(app_id);
  if (it != ats_.end() && it->second.valid_at(clock_.now())) return it->second;
  AccessToken at;
  at.token = rng_.bytes(64);
  at.issued_at = clock_.now();
  at.app_id = app_id;
  ats_[app_id] = at;
  return at;
}

json Platform::ws_invoke_service(const std::string& access_token, const std::string& service,
                                 const json& payload, std::uint64_t count) {
  const AccessToken* at = nullptr;
  for (const auto& [app_id, token] : ats_) {
    if (token.hex() == access_token) at = &token;
  }
  if (!at) throw LabError(LabErrc::InvalidAT, "unknown access token");
  if (!at->valid_at(clock_.now())) throw LabError(LabErrc::AtExpired, at->app_id);
  auto s = catalog_.find(service);
  if (s == catalog_.end()) throw LabError(LabErrc::UnknownService, service);
  if (!app(at->app_id).enabled_services.count(service)) {
    throw LabError(LabErrc::ServiceDisabled, service);
  }
  ledger_.record(at->app_id, s->second, count);
  return {{"service", service}, {"count", count}, {"result", "ok"}, {"echo", payload}};
}

// ---- back-end -----------------------------------------------------------------------

Backend::Backend(Platform& platform, std::string app_id, std::string master_key, BackendOptions options)
    : platform_(platform), app_id_(std::move(app_id)), master_key_(std::move(master_key)),
      options_(options) {}

std::string Backend::login(const std::string& code) {
  auto [openid, ek] = platform_.ws_code2session(app_id_, master_key_, code);
  eks_.insert_or_assign(openid, std::move(ek));
  return openid;
}

const EncryptionKey& Backend::refresh(const std::string& openid) {
  ++refreshes_;
  const auto user = platform_.user_of(openid);
  if (!user) throw LabError(LabErrc::UnknownUser, openid);
  const LoginToken lt = platform_.ws_login(*user, app_id_);
  login(lt.code);
  return eks_.at(openid);
}

SensitiveRecord Backend::consume(const std::string& openid, RecordKind kind, const Envelope& envelope) {
  if (options_.verify_integrity && !platform_.check_encrypted_data(envelope)) {
    throw LabError(LabErrc::IntegrityFailure, "signature mismatch");
  }
  bool refreshed = false;
  auto it = eks_.find(openid);
  const EncryptionKey* ek = nullptr;
  if (it == eks_.end() || !it->second.valid_at(platform_.clock().now())) {
    ek = &refresh(openid);
    refreshed = true;
  } else {
    ek = &it->second;
  }
  auto record = open(ek->key, kind, envelope);
  if (!record && !refreshed) record = open(refresh(openid).key, kind, envelope);
  if (!record) throw LabError(LabErrc::DecryptFailure, to_string(kind));
  return *record;
}

void Backend::add_account(const std::string& phone, const std::string& account) {
  accounts_[phone] = account;
}

std::optional<std::string> Backend::phone_login(const std::string& openid, const Envelope& envelope) {
  const SensitiveRecord r = consume(openid, RecordKind::PhoneNumber, envelope);
  auto it = accounts_.find(r.payload["phoneNumber"].get<std::string>());
  if (it == accounts_.end()) return std::nullopt;
  return it->second;
}

std::int64_t Backend::redeem_steps(const std::string& openid, const Envelope& envelope) {
  const SensitiveRecord r = consume(openid, RecordKind::WeRunData, envelope);
  const json& list = r.payload["stepInfoList"];
  if (list.empty()) return 0;
  return list.back()["step"].get<std::int64_t>() / 10;
}

std::int64_t Backend::redeem_share(const std::string& openid, const Envelope& envelope, Rng& rng) {
  const SensitiveRecord r = consume(openid, RecordKind::ShareInfo, envelope);
  if (!seen_groups_.insert(r.payload["openGId"].get<std::string>()).second) return 0;
  return rng.uniform(1, 10);
}

std::optional<EncryptionKey> Backend::session_key_getter(const std::string& openid) const {
  auto it = eks_.find(openid);
  if (it == eks_.end()) return std::nullopt;
  return it->second;
}

}  // namespace coffeescan::protolab
