#include <doctest.h>

#include "coffeescan/protolab.hpp"

using namespace coffeescan;
using namespace coffeescan::protolab;

namespace {

Bytes hex(std::string_view s) { return *crypto::hex_decode(s); }

ScenarioResult run(const std::string& name, Leak leak, Defense defense, json params = json::object(),
                   std::uint64_t seed = 7) {
  ScenarioSpec spec;
  spec.scenario = name;
  spec.leak = leak;
  spec.defense = defense;
  spec.seed = seed;
  spec.params = std::move(params);
  return run_scenario(spec);
}

// Independent reference: Python `cryptography`, key from base64, iv = 00..0f.
constexpr const char* kKatKey = "6bd6a1ed98880d2c5953aa13ccb096ea";
constexpr const char* kKatIv = "000102030405060708090a0b0c0d0e0f";
constexpr const char* kKatPlain = R"({"phoneNumber":"137****7089"})";
constexpr const char* kKatCipher = "c156dddef3a5a6ebcaf68597c76076a43aa465f55e7ab489762ce8231ab645c4";
constexpr const char* kKatCipherB64 = "wVbd3vOlpuvK9oWXx2B2pDqkZfVeerSJdizoIxq2RcQ=";

}  // namespace

TEST_CASE("aes known answer") {
  CHECK(crypto::base64_encode(hex(kKatKey)) == "a9ah7ZiIDSxZU6oTzLCW6g==");
  const Bytes ct = crypto::aes128_cbc_encrypt(hex(kKatKey), hex(kKatIv), crypto::as_bytes(kKatPlain));
  CHECK(crypto::hex_encode(ct) == kKatCipher);
  CHECK(crypto::base64_encode(ct) == kKatCipherB64);
  const auto pt = crypto::aes128_cbc_decrypt(hex(kKatKey), hex(kKatIv), ct);
  REQUIRE(pt);
  CHECK(crypto::as_string(*pt) == kKatPlain);
}

TEST_CASE("aes nist first block") {
  const Bytes key = hex("2b7e151628aed2a6abf7158809cf4f3c");
  const Bytes iv = hex("000102030405060708090a0b0c0d0e0f");
  const Bytes ct = crypto::aes128_cbc_encrypt(key, iv, hex("6bc1bee22e409f96e93d7e117393172a"));
  REQUIRE(ct.size() == 32);  // plus one padding block
  CHECK(crypto::hex_encode(crypto::ByteView(ct).first(16)) == "7649abac8119b246cee98e9b12e9197d");
}

TEST_CASE("hmac known answer") {
  const Bytes mac = crypto::hmac_sha256(crypto::as_bytes("integrity-key-0123456789abcdef!!"),
                                        crypto::as_bytes("hello"));
  CHECK(crypto::hex_encode(mac) == "b4b12f50211cd4738621cc879d752ebf75e1a92e44efa4a7203fc14b069933e4");
}

TEST_CASE("aes roundtrip on random payloads") {
  Rng rng(2024);
  int ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const Bytes key = rng.bytes(16), iv = rng.bytes(16);
    const Bytes msg = rng.bytes(static_cast<std::size_t>(rng.uniform(0, 200)));
    const Bytes ct = crypto::aes128_cbc_encrypt(key, iv, msg);
    CHECK(ct.size() % 16 == 0);
    CHECK(ct.size() > msg.size());
    const auto back = crypto::aes128_cbc_decrypt(key, iv, ct);
    if (back && *back == msg) ++ok;
  }
  CHECK(ok == 1000);
}

TEST_CASE("aes input errors") {
  CHECK_THROWS_AS(crypto::aes128_cbc_encrypt(Bytes(15), Bytes(16), Bytes{}), crypto::CryptoError);
  CHECK_THROWS_AS(crypto::aes128_cbc_encrypt(Bytes(16), Bytes(8), Bytes{}), crypto::CryptoError);
  CHECK_FALSE(crypto::aes128_cbc_decrypt(Bytes(16), Bytes(16), Bytes(15)));
  CHECK_FALSE(crypto::aes128_cbc_decrypt(Bytes(16), Bytes(16), Bytes{}));
}

TEST_CASE("base64 and hex") {
  CHECK(crypto::base64_encode(crypto::as_bytes("")) == "");
  CHECK(crypto::base64_encode(crypto::as_bytes("f")) == "Zg==");
  CHECK(crypto::base64_encode(crypto::as_bytes("fo")) == "Zm8=");
  CHECK(crypto::base64_encode(crypto::as_bytes("foo")) == "Zm9v");
  CHECK(crypto::as_string(*crypto::base64_decode("Zm8=")) == "fo");
  CHECK(crypto::as_string(*crypto::base64_decode("Zg==")) == "f");
  CHECK_FALSE(crypto::base64_decode("Zm8"));
  CHECK_FALSE(crypto::base64_decode("Z!8="));
  CHECK(crypto::hex_encode(Bytes{0x00, 0xab, 0xff}) == "00abff");
  CHECK_FALSE(crypto::hex_decode("abc"));
  CHECK_FALSE(crypto::hex_decode("zz"));
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(5), b(5);
  CHECK(a.hex(32) == b.hex(32));
  CHECK(a.hex(7).size() == 7);
  for (int i = 0; i < 1000; ++i) {
    const auto v = a.uniform(1, 10);
    CHECK(v >= 1);
    CHECK(v <= 10);
  }
  CHECK_THROWS(a.uniform(3, 2));
}

TEST_CASE("record shapes") {
  CHECK(well_formed({RecordKind::PhoneNumber, {{"phoneNumber", "1"}}}));
  CHECK_FALSE(well_formed({RecordKind::PhoneNumber, {{"phoneNumber", 1}}}));
  CHECK_FALSE(well_formed({RecordKind::PhoneNumber, {{"phoneNumber", "1"}, {"x", 1}}}));
  CHECK(well_formed({RecordKind::WeRunData,
                     {{"stepInfoList", json::array({{{"timestamp", 1}, {"step", 2}}})}}}));
  CHECK_FALSE(well_formed({RecordKind::WeRunData, {{"stepInfoList", json::array({{{"step", 2}}})}}}));
  CHECK(parse_record_kind("ShareInfo") == RecordKind::ShareInfo);
  CHECK_FALSE(parse_record_kind("Nope"));
}

struct PlatformFixture {
  SimClock clock;
  Rng rng{11};
  Platform platform;
  std::string mk = "0123456789abcdef0123456789abcdef";

  explicit PlatformFixture(PlatformOptions options = {}) : platform(clock, rng, options) {
    platform.register_app({"wxapp", mk, {"openapi.ocr.idCard", "jokebot"}});
    platform.register_user("u");
    platform.set_record("u", {RecordKind::PhoneNumber, {{"phoneNumber", kVictimPhone}}});
  }
};

TEST_CASE("login token rules") {
  PlatformFixture f;
  const LoginToken lt = f.platform.ws_login("u", "wxapp");
  CHECK(lt.code.size() == 32);
  CHECK_THROWS_AS(f.platform.ws_code2session("wxapp", "bad", lt.code), LabError);
  auto [openid, ek] = f.platform.ws_code2session("wxapp", f.mk, lt.code);
  CHECK(openid.size() == 28);
  CHECK(openid[0] == 'o');
  CHECK(ek.key.size() == 16);
  try {
    f.platform.ws_code2session("wxapp", f.mk, lt.code);
    FAIL("reuse accepted");
  } catch (const LabError& e) {
    CHECK(e.code() == LabErrc::InvalidLT);
  }
  const LoginToken late = f.platform.ws_login("u", "wxapp");
  f.clock.advance(300);
  CHECK_THROWS_AS(f.platform.ws_code2session("wxapp", f.mk, late.code), LabError);
  const LoginToken edge = f.platform.ws_login("u", "wxapp");
  f.clock.advance(299);
  CHECK_NOTHROW(f.platform.ws_code2session("wxapp", f.mk, edge.code));
  CHECK_THROWS_AS(f.platform.ws_login("nobody", "wxapp"), LabError);
  CHECK_THROWS_AS(f.platform.ws_login("u", "wxother"), LabError);
}

TEST_CASE("encryption key stable within ttl") {
  PlatformFixture f;
  auto [o1, ek1] = f.platform.ws_code2session("wxapp", f.mk, f.platform.ws_login("u", "wxapp").code);
  f.clock.advance(100);
  auto [o2, ek2] = f.platform.ws_code2session("wxapp", f.mk, f.platform.ws_login("u", "wxapp").code);
  CHECK(o1 == o2);
  CHECK(ek1 == ek2);
  f.clock.advance(200);
  auto [o3, ek3] = f.platform.ws_code2session("wxapp", f.mk, f.platform.ws_login("u", "wxapp").code);
  CHECK(ek3.key != ek1.key);
}

TEST_CASE("envelopes open with the current key") {
  PlatformFixture f;
  auto [openid, ek] = f.platform.ws_code2session("wxapp", f.mk, f.platform.ws_login("u", "wxapp").code);
  const Envelope env = f.platform.ws_fetch_encrypted("u", "wxapp", RecordKind::PhoneNumber);
  CHECK_FALSE(env.signature);
  const auto rec = open(ek.key, RecordKind::PhoneNumber, env);
  REQUIRE(rec);
  CHECK(rec->payload["phoneNumber"] == kVictimPhone);
  CHECK_FALSE(open(Bytes(16, 0), RecordKind::PhoneNumber, env).has_value());
  CHECK_THROWS_AS(f.platform.ws_fetch_encrypted("u", "wxapp", RecordKind::ShareInfo), LabError);
}

TEST_CASE("integrity rejects every single-bit ciphertext flip") {
  PlatformFixture f({kEncryptionKeyTtl, true});
  const Envelope env = f.platform.ws_fetch_encrypted("u", "wxapp", RecordKind::PhoneNumber);
  REQUIRE(env.signature);
  CHECK(env.signature->size() == crypto::kMacSize);
  CHECK(f.platform.check_encrypted_data(env));
  const Bytes ct = *crypto::base64_decode(env.encrypted_data);
  Rng pick(99);
  int rejected = 0;
  for (int trial = 0; trial < 256; ++trial) {
    Bytes flipped = ct;
    const auto bit = static_cast<std::size_t>(pick.uniform(0, static_cast<std::int64_t>(ct.size() * 8 - 1)));
    flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    Envelope tampered = env;
    tampered.encrypted_data = crypto::base64_encode(flipped);
    if (!f.platform.check_encrypted_data(tampered)) ++rejected;
  }
  CHECK(rejected == 256);

  Envelope other_app = env;
  other_app.app_id = "wxelse";
  CHECK_FALSE(f.platform.check_encrypted_data(other_app));
  Envelope unsigned_env = env;
  unsigned_env.signature.reset();
  CHECK_FALSE(f.platform.check_encrypted_data(unsigned_env));
}

TEST_CASE("access tokens and billing") {
  PlatformFixture f;
  const AccessToken at = f.platform.ws_get_access_token("wxapp", f.mk);
  CHECK(at.hex().size() == 128);
  CHECK(f.platform.ws_get_access_token("wxapp", f.mk).token == at.token);
  CHECK_THROWS_AS(f.platform.ws_get_access_token("wxapp", "guess"), LabError);
  f.platform.ws_invoke_service(at.hex(), "openapi.ocr.idCard", json::object(), 1'000'000);
  f.platform.ws_invoke_service(at.hex(), "jokebot", json::object(), 5);
  CHECK(f.platform.ledger().count("wxapp", "openapi.ocr.idCard") == 1'000'000);
  CHECK(f.platform.ledger().cost("wxapp") == 1000.0);
  auto code_of = [&](auto&& fn) {
    try {
      fn();
    } catch (const LabError& e) {
      return std::string(to_string(e.code()));
    }
    return std::string("ok");
  };
  CHECK(code_of([&] { f.platform.ws_invoke_service(at.hex(), "geoc", {}); }) == "ServiceDisabled");
  CHECK(code_of([&] { f.platform.ws_invoke_service(at.hex(), "nope", {}); }) == "UnknownService");
  CHECK(code_of([&] { f.platform.ws_invoke_service("00", "jokebot", {}); }) == "InvalidAT");
  f.clock.advance(7200);
  CHECK(code_of([&] { f.platform.ws_invoke_service(at.hex(), "jokebot", {}); }) == "AtExpired");
}

TEST_CASE("catalog prices") {
  std::map<std::string, double> price;
  for (const auto& s : default_catalog()) price[s.name] = s.price_per_million;
  CHECK(price.at("openapi.ocr.idCard") == 1000);
  CHECK(price.at("openapi.ocr.bankCard") == 1000);
  CHECK(price.at("weOpensecRiskservice") == 5000);
  CHECK(price.at("weOpenSecuseracctRiskLevel") == 5000);
  CHECK(price.at("poisearch") == 260);
  CHECK(price.at("coordTrans") == 260);
  CHECK(price.at("jokebot") == 0);
  CHECK(price.at("goodclass2") == 0);
}

TEST_CASE("backend refreshes once and then fails") {
  PlatformFixture f;
  Backend backend(f.platform, "wxapp", f.mk);
  backend.add_account(kVictimPhone, "acct");
  const std::string openid = backend.login(f.platform.ws_login("u", "wxapp").code);
  const Envelope env = f.platform.ws_fetch_encrypted("u", "wxapp", RecordKind::PhoneNumber);
  CHECK(backend.phone_login(openid, env) == std::optional<std::string>("acct"));
  CHECK(backend.refreshes() == 0);
  Envelope garbage = env;
  garbage.encrypted_data = crypto::base64_encode(Bytes(32, 1));
  CHECK_THROWS_AS(backend.phone_login(openid, garbage), LabError);
  CHECK(backend.refreshes() == 1);
  CHECK(backend.session_key_getter(openid).has_value());
  CHECK_FALSE(backend.session_key_getter("ounknown").has_value());
}

TEST_CASE("scenario matrix: hijack") {
  for (Leak leak : {Leak::None, Leak::MK, Leak::EK}) {
    for (Defense defense : {Defense::None, Defense::Integrity}) {
      const auto r = run("hijack", leak, defense);
      const bool expected = leak == Leak::MK && defense == Defense::None;
      CHECK_MESSAGE((r.outcome == "success") == expected, to_json(r.transcript.events().back()).dump());
      CHECK(r.outcome == (expected ? "success" : "blocked"));
    }
  }
  const auto ok = run("hijack", Leak::MK, Defense::None);
  CHECK(ok.summary["account"] == "victim-account");
  const auto guarded = run("hijack", Leak::MK, Defense::Integrity);
  CHECK(guarded.summary["reason"] == "IntegrityFailure");
  const auto no_key = run("hijack", Leak::None, Defense::None);
  CHECK(no_key.summary["reason"] == "InvalidMK");
  CHECK(run("hijack", Leak::EK, Defense::None).summary["reason"] == "InvalidMK");
  // the getter path still opens promotion abuse
  CHECK(run("promotion", Leak::EK, Defense::None).outcome == "success");
}

TEST_CASE("scenario matrix: temporal rules") {
  CHECK(run("replay", Leak::MK, Defense::None).outcome == "blocked");
  CHECK(run("replay", Leak::MK, Defense::None, {{"delay", 100}}).outcome == "success");
  const auto lt = run("lt_expiry", Leak::MK, Defense::None);
  CHECK(lt.outcome == "blocked");
  CHECK(lt.summary["expired_rejected"] == true);
  CHECK(lt.summary["reuse_rejected"] == true);
  CHECK(run("lt_expiry", Leak::MK, Defense::None, {{"delay", 10}}).summary["expired_rejected"] == false);
  const auto at = run("at_expiry", Leak::MK, Defense::None);
  CHECK(at.outcome == "blocked");
  CHECK(at.summary["error"] == "AtExpired");
  CHECK(at.summary["cached"] == true);
  CHECK(at.summary["renewed_differs"] == true);
  CHECK(run("at_expiry", Leak::MK, Defense::None, {{"delay", 7199}}).outcome == "success");
  CHECK(run("same_ek", Leak::MK, Defense::None).outcome == "same");
  CHECK(run("same_ek", Leak::MK, Defense::None, {{"delay", 301}}).outcome == "different");
}

TEST_CASE("scenario matrix: service theft ledger") {
  const auto r = run("service_theft", Leak::MK, Defense::None, {{"n", 1'000'000}});
  CHECK(r.outcome == "success");
  CHECK(r.summary["cost"].get<double>() == 1000.0);
  CHECK(run("service_theft", Leak::MK, Defense::None, {{"n", 1000}, {"service", "geoc"}})
            .summary["cost"].get<double>() == doctest::Approx(0.26));
  CHECK(run("service_theft", Leak::MK, Defense::None, {{"n", 10}, {"service", "jokebot"}})
            .summary["cost"].get<double>() == 0.0);
  const auto none = run("service_theft", Leak::None, Defense::None);
  CHECK(none.outcome == "blocked");
  CHECK(none.summary["cost"].get<double>() == 0.0);
  CHECK(run("service_theft", Leak::MK, Defense::None, {{"service", "poisearch"}}).summary["reason"] ==
        "ServiceDisabled");
}

TEST_CASE("scenario matrix: promotion") {
  const auto r = run("promotion", Leak::MK, Defense::None);
  CHECK(r.outcome == "success");
  CHECK(r.summary["step"] == 100000);
  CHECK(r.summary["points"] == 10000);
  bool carried = false;
  for (const auto& e : r.transcript.events()) {
    if (e.op == "redeem_steps" && e.detail.value("step", 0) == 100000) carried = true;
  }
  CHECK(carried);

  const auto share = run("promotion", Leak::MK, Defense::None, {{"variant", "share"}, {"groups", 5}});
  CHECK(share.outcome == "success");
  CHECK(share.summary["awards"].size() == 5);
  for (const auto& cents : share.summary["awards"]) {
    CHECK(cents.get<int>() >= 1);
    CHECK(cents.get<int>() <= 10);
  }
  CHECK(share.summary["duplicate_denied"] == true);
  CHECK(run("promotion", Leak::MK, Defense::Integrity).outcome == "blocked");
  CHECK(run("promotion", Leak::None, Defense::None).outcome == "blocked");
}

TEST_CASE("scenarios are deterministic under a fixed seed") {
  for (const std::string& name : scenario_names()) {
    const auto a = run(name, Leak::MK, Defense::None, json::object(), 42);
    const auto b = run(name, Leak::MK, Defense::None, json::object(), 42);
    CHECK(a.transcript.to_jsonl() == b.transcript.to_jsonl());
    CHECK(a.outcome == b.outcome);
    const auto c = run(name, Leak::MK, Defense::None, json::object(), 43);
    CHECK(a.outcome == c.outcome);
  }
}

TEST_CASE("transcripts are well formed") {
  const auto r = run("hijack", Leak::MK, Defense::None);
  const auto& events = r.transcript.events();
  REQUIRE(events.size() >= 3);
  CHECK(events.front().op == "setup");
  CHECK(events.back().step == "result");
  CHECK(events.back().outcome == r.outcome);
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
  std::size_t lines = 0;
  for (char c : r.transcript.to_jsonl()) lines += c == '\n';
  CHECK(lines == events.size());
  const json first = json::parse(r.transcript.to_jsonl().substr(0, r.transcript.to_jsonl().find('\n')));
  for (const char* key : {"seq", "t", "step", "actor", "op", "outcome", "detail"}) CHECK(first.contains(key));
}

TEST_CASE("master key never appears in transcripts without a leak") {
  for (const std::string& name : {"hijack", "service_theft", "promotion"}) {
    ScenarioSpec spec;
    spec.scenario = name;
    spec.leak = Leak::None;
    spec.seed = 3;
    Rng probe(spec.seed);
    probe.bytes(32);  // platform integrity key
    const std::string app_id = "wx" + probe.hex(16);
    const std::string mk = probe.hex(32);
    const auto r = run_scenario(spec);
    CHECK(r.outcome == "blocked");
    CHECK(r.transcript.to_jsonl().find(app_id) != std::string::npos);
    CHECK(r.transcript.to_jsonl().find(mk) == std::string::npos);
  }
}

TEST_CASE("scenario spec parsing") {
  const auto spec = parse_scenario(json::parse(
      R"({"scenario":"promotion","leak":"ek","defense":"integrity","seed":9,"expect":"blocked","variant":"share"})"));
  CHECK(spec.scenario == "promotion");
  CHECK(spec.leak == Leak::EK);
  CHECK(spec.defense == Defense::Integrity);
  CHECK(spec.seed == 9);
  CHECK(spec.expect == std::optional<std::string>("blocked"));
  CHECK(spec.params["variant"] == "share");
  CHECK(parse_scenario(to_json(spec)).params == spec.params);
  CHECK_THROWS_AS(parse_scenario(json::parse(R"({"leak":"mk"})")), std::invalid_argument);
  CHECK_THROWS_AS(parse_scenario(json::parse(R"({"scenario":"hijack","leak":"all"})")), std::invalid_argument);
  CHECK_THROWS_AS(parse_scenario(json::array()), std::invalid_argument);
  ScenarioSpec bad;
  bad.scenario = "teleport";
  CHECK_THROWS_AS(run_scenario(bad), std::invalid_argument);
}
