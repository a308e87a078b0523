#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coffeescan/crypto.hpp"

// Deterministic model of the platform's key protocol: the host platform
// (login tokens, session keys, access tokens, sensitive data), a developer
// back-end consuming encrypted envelopes, and the attacks built on leaked keys.
namespace coffeescan::protolab {

using crypto::Bytes;
using nlohmann::json;

// ---- time and randomness ---------------------------------------------------------

/// Simulated seconds since scenario start. Only moves when advanced.
class SimClock {
 public:
  std::int64_t now() const { return now_; }
  void advance(std::int64_t seconds) { now_ += seconds; }
  void set(std::int64_t t) { now_ = t; }

 private:
  std::int64_t now_ = 0;
};

/// Seeded generator. Distributions are implemented here so output does not
/// depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  Bytes bytes(std::size_t n);
  std::string hex(std::size_t n_chars);
  /// Uniform in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 engine_;
};

// ---- credentials ------------------------------------------------------------------

inline constexpr std::int64_t kLoginTokenTtl = 300;
inline constexpr std::int64_t kEncryptionKeyTtl = 300;
inline constexpr std::int64_t kAccessTokenTtl = 7200;

struct MiniAppRegistration {
  std::string app_id;
  std::string master_key;  // 32 lowercase hex chars
  std::set<std::string> enabled_services;
};

struct LoginToken {
  std::string code;  // 32 hex chars
  std::int64_t issued_at = 0;
  std::string user_id;
  std::string app_id;
  bool consumed = false;

  bool valid_at(std::int64_t now) const { return !consumed && now - issued_at < kLoginTokenTtl; }
};

struct EncryptionKey {
  Bytes key;  // 16 bytes
  std::int64_t issued_at = 0;
  std::string user_id;
  std::string app_id;
  std::int64_t ttl_seconds = kEncryptionKeyTtl;

  bool valid_at(std::int64_t now) const { return now - issued_at < ttl_seconds; }
  friend bool operator==(const EncryptionKey&, const EncryptionKey&) = default;
};

struct AccessToken {
  Bytes token;  // 64 bytes
  std::int64_t issued_at = 0;
  std::string app_id;

  std::string hex() const { return crypto::hex_encode(token); }
  bool valid_at(std::int64_t now) const { return now - issued_at < kAccessTokenTtl; }
};

enum class RecordKind { PhoneNumber, UserInfo, WeRunData, ShareInfo };

const char* to_string(RecordKind kind);
std::optional<RecordKind> parse_record_kind(std::string_view name);

struct SensitiveRecord {
  RecordKind kind = RecordKind::PhoneNumber;
  json payload;

  friend bool operator==(const SensitiveRecord&, const SensitiveRecord&) = default;
};

/// Checks that the payload carries exactly the keys fixed for its kind.
bool well_formed(const SensitiveRecord& record);

struct Envelope {
  std::string encrypted_data;  // base64
  std::string iv;              // base64 of 16 bytes
  std::optional<Bytes> signature;
  std::string app_id;
  std::string user_id;
};

/// Message covered by the integrity MAC: u32be(len) || field, for app_id,
/// iv bytes and ciphertext bytes.
Bytes signed_message(const std::string& app_id, crypto::ByteView iv, crypto::ByteView ciphertext);

Envelope seal(const EncryptionKey& ek, const SensitiveRecord& record, Rng& rng);
/// Decrypts and parses; nullopt on padding, encoding or JSON failure.
std::optional<SensitiveRecord> open(const Bytes& ek, RecordKind kind, const Envelope& envelope);

struct ServiceCatalogEntry {
  std::string name;
  double price_per_million = 0;  // USD
  bool free = false;
};

/// Cloud services with the prices listed for the platform.
const std::vector<ServiceCatalogEntry>& default_catalog();

class BillingLedger {
 public:
  void record(const std::string& app_id, const ServiceCatalogEntry& service, std::uint64_t count = 1);
  std::uint64_t count(const std::string& app_id, const std::string& service) const;
  /// Σ count × price_per_million / 1e6 over the app's services.
  double cost(const std::string& app_id) const;
  double total_cost() const;

 private:
  struct Line {
    std::uint64_t count = 0;
    double price_per_million = 0;
  };
  std::map<std::string, std::map<std::string, Line>> lines_;
};

// ---- errors -----------------------------------------------------------------------

enum class LabErrc {
  UnknownUser,
  UnknownApp,
  InvalidMK,
  InvalidLT,
  NoSuchRecord,
  IntegrityFailure,
  DecryptFailure,
  AtExpired,
  InvalidAT,
  ServiceDisabled,
  UnknownService,
};

const char* to_string(LabErrc code);

class LabError : public std::runtime_error {
 public:
  LabError(LabErrc code, const std::string& detail);
  LabErrc code() const noexcept { return code_; }

 private:
  LabErrc code_;
};

// ---- actors -----------------------------------------------------------------------

struct PlatformOptions {
  std::int64_t ek_ttl = kEncryptionKeyTtl;
  bool integrity = false;  // sign envelopes
};

/// Host platform: issues LT/EK/AT, stores sensitive records, bills services.
class Platform {
 public:
  Platform(SimClock& clock, Rng& rng, PlatformOptions options = {});

  void register_app(MiniAppRegistration app);
  void register_user(const std::string& user_id);
  void set_record(const std::string& user_id, SensitiveRecord record);
  const SensitiveRecord* record(const std::string& user_id, RecordKind kind) const;
  void add_service(ServiceCatalogEntry service);

  bool has_app(const std::string& app_id) const;
  const std::vector<MiniAppRegistration>& apps() const { return apps_; }

  LoginToken ws_login(const std::string& user_id, const std::string& app_id);
  /// Consumes the LT. Returns the openid and the user's current EK.
  std::pair<std::string, EncryptionKey> ws_code2session(const std::string& app_id,
                                                        const std::string& mk,
                                                        const std::string& code);
  Envelope ws_fetch_encrypted(const std::string& user_id, const std::string& app_id, RecordKind kind);
  AccessToken ws_get_access_token(const std::string& app_id, const std::string& mk);
  json ws_invoke_service(const std::string& access_token, const std::string& service,
                         const json& payload, std::uint64_t count = 1);

  /// Signature check for envelopes; false when unsigned or tampered.
  bool check_encrypted_data(const Envelope& envelope) const;

  std::string openid(const std::string& user_id, const std::string& app_id);
  /// Reverse of openid(); used by the simulated front-end to log in again.
  std::optional<std::string> user_of(const std::string& openid) const;
  const BillingLedger& ledger() const { return ledger_; }
  const PlatformOptions& options() const { return options_; }
  SimClock& clock() { return clock_; }

 private:
  const MiniAppRegistration& app(const std::string& app_id) const;
  const EncryptionKey& current_ek(const std::string& user_id, const std::string& app_id);

  SimClock& clock_;
  Rng& rng_;
  PlatformOptions options_;
  Bytes integrity_key_;
  std::vector<MiniAppRegistration> apps_;
  std::set<std::string> users_;
  std::map<std::string, std::map<RecordKind, SensitiveRecord>> records_;
  std::map<std::string, LoginToken> tokens_;                              // by code
  std::map<std::pair<std::string, std::string>, EncryptionKey> eks_;      // (user, app)
  std::map<std::pair<std::string, std::string>, std::string> openids_;    // (user, app)
  std::map<std::string, AccessToken> ats_;                                // by app
  std::map<std::string, ServiceCatalogEntry> catalog_;
  BillingLedger ledger_;
};

struct BackendOptions {
  bool verify_integrity = false;
};

/// Developer back-end: exchanges LTs for EKs, decrypts envelopes and serves
/// accounts indexed by phone number. Sessions are keyed by openid.
class Backend {
 public:
  Backend(Platform& platform, std::string app_id, std::string master_key, BackendOptions options = {});

  /// Login with an LT obtained by the front-end; returns the openid.
  std::string login(const std::string& code);

  /// Decrypts an envelope for the session, refreshing the EK once on failure.
  SensitiveRecord consume(const std::string& openid, RecordKind kind, const Envelope& envelope);

  void add_account(const std::string& phone, const std::string& account);
  /// Phone-number login: decrypts the envelope and returns the matching account.
  std::optional<std::string> phone_login(const std::string& openid, const Envelope& envelope);

  /// Points for a WeRun envelope: one point per 10 steps of the latest entry.
  std::int64_t redeem_steps(const std::string& openid, const Envelope& envelope);
  /// Red packet in cents for an unseen group id; 0 when already awarded.
  std::int64_t redeem_share(const std::string& openid, const Envelope& envelope, Rng& rng);

  /// The misused session-key getter: returns the session's EK to the caller.
  std::optional<EncryptionKey> session_key_getter(const std::string& openid) const;

  std::size_t refreshes() const { return refreshes_; }

 private:
  const EncryptionKey& refresh(const std::string& openid);

  Platform& platform_;
  std::string app_id_;
  std::string master_key_;
  BackendOptions options_;
  std::map<std::string, EncryptionKey> eks_;     // by openid
  std::map<std::string, std::string> accounts_;  // phone -> account
  std::set<std::string> seen_groups_;
  std::size_t refreshes_ = 0;
};

// ---- scenarios --------------------------------------------------------------------

enum class Leak { None, MK, EK };
enum class Defense { None, Integrity };

struct TranscriptEvent {
  std::uint64_t seq = 0;
  std::int64_t t = 0;
  std::string step;
  std::string actor;
  std::string op;
  std::string outcome;
  json detail = json::object();
};

class Transcript {
 public:
  void add(const SimClock& clock, std::string step, std::string actor, std::string op,
           std::string outcome, json detail = json::object());
  const std::vector<TranscriptEvent>& events() const { return events_; }
  std::string to_jsonl() const;

 private:
  std::vector<TranscriptEvent> events_;
};

json to_json(const TranscriptEvent& e);

struct ScenarioSpec {
  std::string scenario;
  Leak leak = Leak::MK;
  Defense defense = Defense::None;
  std::uint64_t seed = 1;
  std::optional<std::string> expect;
  json params = json::object();
};

/// Throws std::invalid_argument on unknown enum values or missing fields.
ScenarioSpec parse_scenario(const json& j);
json to_json(const ScenarioSpec& spec);

struct ScenarioResult {
  std::string outcome;  // "success", "blocked", or a scenario-specific value
  Transcript transcript;
  json summary = json::object();
};

const std::vector<std::string>& scenario_names();

/// Runs one scenario; throws std::invalid_argument for unknown names.
ScenarioResult run_scenario(const ScenarioSpec& spec);

// Fixed fixture values.
inline constexpr const char* kAttackerPhone = "137****7089";
inline constexpr const char* kVictimPhone = "189****3630";

}  // namespace coffeescan::protolab
