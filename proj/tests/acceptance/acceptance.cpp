// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unistd.h>

#include "coffeescan/crypto.hpp"
#include "coffeescan/detectors.hpp"
#include "coffeescan/forge.hpp"
#include "coffeescan/keyval.hpp"
#include "coffeescan/pkg.hpp"
#include "coffeescan/protolab.hpp"
#include "coffeescan/scan.hpp"

using namespace coffeescan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path fixtures() { return COFFEESCAN_FIXTURES; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coffeescan-acceptance-" + std::to_string(getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- planted corpus ------------------------------------------------------------------

Outcome planted_corpus() {
  const auto t0 = std::chrono::steady_clock::now();
  forge::ForgeOptions opt;
  opt.seed = 2024;
  const forge::Corpus corpus = forge::generate(opt);
  const fs::path dir = scratch("corpus");
  forge::write_corpus(corpus, dir);

  const auto reports = scan::scan_corpus_parallel(scan::expand_inputs({dir}), {});
  const double elapsed = seconds_since(t0);

  using Key = std::tuple<std::string, std::string, std::string, std::uint32_t>;
  std::multiset<Key> expected, found;
  std::set<std::string> kinds, levels;
  std::size_t clean = 0, bad_plant_count = 0;
  for (const auto& p : corpus.packages) {
    if (p.plants.empty()) ++clean;
    else if (p.plants.size() < 2 || p.plants.size() > 4) ++bad_plant_count;
    for (const auto& pl : p.plants) {
      expected.emplace(p.id, detectors::to_string(pl.detector), pl.file, pl.line);
      kinds.insert(detectors::to_string(pl.detector));
      levels.insert(forge::to_string(pl.obfuscation));
    }
  }
  std::size_t errors = 0;
  for (const auto& r : reports) {
    if (r.error) ++errors;
    for (const auto& f : r.findings) {
      found.emplace(r.package, detectors::to_string(f.finding.detector), f.finding.file, f.finding.span.start_line);
    }
  }
  std::vector<Key> tp;
  std::set_intersection(expected.begin(), expected.end(), found.begin(), found.end(), std::back_inserter(tp));
  const double precision = found.empty() ? 1.0 : double(tp.size()) / double(found.size());
  const double recall = expected.empty() ? 1.0 : double(tp.size()) / double(expected.size());

  std::ostringstream d;
  d << corpus.packages.size() << " packages (" << clean << " clean), " << expected.size() << " plants, "
    << kinds.size() << " classes, " << levels.size() << " obfuscation levels; P=" << precision << " R=" << recall
    << "; " << elapsed << " s";
  const bool shape = corpus.packages.size() == 200 && clean == 150 && bad_plant_count == 0 && kinds.size() == 7 &&
                     levels.size() == forge::kAllObfuscations.size();
  fs::remove_all(dir);
  return {shape && errors == 0 && precision == 1.0 && recall == 1.0 && elapsed < 30.0, d.str()};
}

// ---- figure fixtures -----------------------------------------------------------------

std::vector<detectors::Finding> scan_fixture(const std::string& name) {
  std::vector<detectors::Finding> out;
  for (auto& rf : scan::scan_package(pkg::read_directory(fixtures() / "figures" / name), name, {}).findings) {
    out.push_back(rf.finding);
  }
  return out;
}

std::size_t count(const std::vector<detectors::Finding>& fs_, detectors::DetectorKind k) {
  return static_cast<std::size_t>(
      std::count_if(fs_.begin(), fs_.end(), [k](const auto& f) { return f.detector == k; }));
}

Outcome figure_fixtures() {
  using K = detectors::DetectorKind;
  const auto c1 = scan_fixture("case1");
  const auto c2 = scan_fixture("case2");
  const auto c3 = scan_fixture("case3");
  const bool ok1 = c1.size() == 1 && c1[0].detector == K::BleMisconfig &&
                   c1[0].confidence == detectors::Confidence::High;
  const bool ok2 = count(c2, K::MissingCrossAppCheck) == 0;
  bool dup = false;
  for (const auto& f : c3) {
    if (f.detector == K::SessionKeyUrl) dup = f.evidence.starts_with("Duplication");
  }
  const bool ok3 = c3.size() == 2 && count(c3, K::AppSecretString) == 1 && count(c3, K::SessionKeyUrl) == 1 && dup;
  std::ostringstream d;
  d << "case1 " << c1.size() << " finding(s)" << (ok1 ? "" : " [mismatch]") << "; case2 "
    << count(c2, K::MissingCrossAppCheck) << " cross-app; case3 " << count(c3, K::AppSecretString)
    << " AppSecretString + " << count(c3, K::SessionKeyUrl) << " SessionKeyUrl" << (dup ? "(Duplication)" : "");
  return {ok1 && ok2 && ok3, d.str()};
}

// ---- url table -----------------------------------------------------------------------

Outcome url_table() {
  using U = detectors::UrlClass;
  const std::vector<std::pair<std::string, U>> rows = {
      {"api.weixin.qq.com/sns/jscode2session", U::Duplication},
      {"/admin/index.php?m=get_session_key", U::Getter},
      {"/auth/jscode2session", U::Duplication},
      {"/wxapp/getNewSessionKey", U::Getter},
      {"/wxapp/Getsessionkey", U::Getter},
      {"/bale/pay.php?do=getSession", U::Getter},
      {"/mini_shop_h5/Setting/get_session_key", U::Getter},
      {"/login/getJcbWxSessionKey", U::Getter},
      {"/entry/wxapp/GetSessionkey", U::Getter},
      {"/weapp/member/get_session_key.json", U::Getter},
  };
  const detectors::DetectorConfig cfg;
  int hits = 0;
  std::string misses;
  for (const auto& [url, want] : rows) {
    const U got = detectors::classify_url(url, cfg);
    if (got == want) ++hits;
    else misses += " " + url + "=" + detectors::to_string(got);
  }
  return {hits == 10, std::to_string(hits) + "/10" + misses};
}

// ---- secret validation ---------------------------------------------------------------

Outcome secret_validation() {
  constexpr std::size_t kApps = 20, kDecoys = 500;
  const keyval::RateLimitPolicy policy{100, std::chrono::seconds(1), 4};

  protolab::Rng rng(77);
  keyval::MockSeed seed;
  std::set<std::string> keys;
  for (std::size_t i = 0; i < kApps; ++i) {
    seed.registrations.push_back({"wx" + rng.hex(16), rng.hex(32), {"jokebot"}});
    keys.insert(seed.registrations.back().master_key);
  }
  std::vector<std::vector<std::string>> decoys(kApps);
  std::set<std::string> seen = keys;
  for (std::size_t i = 0; i < kDecoys;) {
    std::string d = rng.hex(32);
    if (!seen.insert(d).second) continue;
    decoys[i % kApps].push_back(std::move(d));
    ++i;
  }

  std::vector<pkg::Package> packages;
  for (std::size_t a = 0; a < kApps; ++a) {
    const auto& reg = seed.registrations[a];
    std::vector<std::string> strings = decoys[a];
    strings.insert(strings.begin() + rng.uniform(0, static_cast<std::int64_t>(strings.size())), reg.master_key);
    std::ostringstream js;
    for (std::size_t i = 0; i < strings.size(); ++i) js << "var k" << i << " = \"" << strings[i] << "\";\n";
    packages.emplace_back(std::vector<pkg::FileEntry>{
        pkg::make_entry("project.config.json", json{{"appid", reg.app_id}}.dump()),
        pkg::make_entry("utils/keys.js", js.str())});
  }

  auto platform = std::make_shared<keyval::MockPlatform>(seed);
  keyval::MockServer server(platform);
  server.start();
  auto limiter = std::make_shared<keyval::RateLimiter>(policy);
  keyval::ValidationClient client(server.url(), limiter);
  scan::ScanOptions options;
  options.validator = &client;

  std::size_t valid = 0, false_valid = 0, invalid = 0, other = 0, candidates = 0;
  for (std::size_t a = 0; a < kApps; ++a) {
    const auto r = scan::scan_package(packages[a], "fuzz-" + std::to_string(a), options);
    for (const auto& f : r.findings) {
      if (!f.verdict) continue;
      ++candidates;
      switch (f.verdict->kind) {
        case keyval::Verdict::Kind::Valid:
          ++valid;
          if (*f.finding.candidate_secret != seed.registrations[a].master_key) ++false_valid;
          break;
        case keyval::Verdict::Kind::Invalid: ++invalid; break;
        default: ++other;
      }
    }
  }
  server.stop();

  const auto grants = limiter->grants();
  const bool within = keyval::respects_limit(grants, policy.max_requests, policy.window);
  std::ostringstream d;
  d << candidates << " candidates: " << valid << " Valid, " << false_valid << " false Valid, " << invalid
    << " Invalid, " << other << " other; " << grants.size() << " requests, "
    << (within ? "within" : "EXCEEDS") << " " << policy.max_requests << "/1s";
  return {candidates == kApps + kDecoys && valid == kApps && false_valid == 0 && invalid == kDecoys && within &&
              grants.size() == client.requests_sent(),
          d.str()};
}

// ---- crypto --------------------------------------------------------------------------

Outcome crypto_checks() {
  using crypto::Bytes;
  protolab::Rng rng(31337);
  int roundtrips = 0;
  for (int i = 0; i < 1000; ++i) {
    const Bytes key = rng.bytes(16), iv = rng.bytes(16);
    const Bytes msg = rng.bytes(static_cast<std::size_t>(rng.uniform(0, 512)));
    const auto back = crypto::aes128_cbc_decrypt(key, iv, crypto::aes128_cbc_encrypt(key, iv, msg));
    if (back && *back == msg) ++roundtrips;
  }

  // computed beforehand with Python `cryptography`
  const Bytes key = *crypto::hex_decode("6bd6a1ed98880d2c5953aa13ccb096ea");
  const Bytes iv = *crypto::hex_decode("000102030405060708090a0b0c0d0e0f");
  const Bytes ct = crypto::aes128_cbc_encrypt(key, iv, crypto::as_bytes(R"({"phoneNumber":"137****7089"})"));
  const bool kat = crypto::hex_encode(ct) == "c156dddef3a5a6ebcaf68597c76076a43aa465f55e7ab489762ce8231ab645c4";

  protolab::SimClock clock;
  protolab::Rng prng(5);
  protolab::Platform platform(clock, prng, {protolab::kEncryptionKeyTtl, true});
  platform.register_app({"wxapp", "0123456789abcdef0123456789abcdef", {}});
  platform.register_user("u");
  platform.set_record("u", {protolab::RecordKind::PhoneNumber, {{"phoneNumber", protolab::kVictimPhone}}});
  const auto env = platform.ws_fetch_encrypted("u", "wxapp", protolab::RecordKind::PhoneNumber);
  const Bytes cipher = *crypto::base64_decode(env.encrypted_data);
  std::mt19937_64 pick(256);
  int rejected = 0;
  for (int trial = 0; trial < 256; ++trial) {
    Bytes flipped = cipher;
    const std::size_t bit = pick() % (cipher.size() * 8);
    flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    auto tampered = env;
    tampered.encrypted_data = crypto::base64_encode(flipped);
    if (!platform.check_encrypted_data(tampered)) ++rejected;
  }
  const bool untouched = platform.check_encrypted_data(env);

  std::ostringstream d;
  d << roundtrips << "/1000 roundtrips, known answer " << (kat ? "ok" : "MISMATCH") << ", " << rejected
    << "/256 flips rejected";
  return {roundtrips == 1000 && kat && rejected == 256 && untouched, d.str()};
}

// ---- protocol lab --------------------------------------------------------------------

protolab::ScenarioResult lab(const std::string& name, protolab::Leak leak, protolab::Defense defense,
                             json params = json::object()) {
  protolab::ScenarioSpec spec;
  spec.scenario = name;
  spec.leak = leak;
  spec.defense = defense;
  spec.seed = 42;
  spec.params = std::move(params);
  return protolab::run_scenario(spec);
}

Outcome lab_matrix() {
  using protolab::Defense;
  using protolab::Leak;
  std::vector<std::pair<std::string, std::function<bool()>>> checks = {
      {"hijack iff leak=mk and no defense",
       [] {
         for (Leak leak : {Leak::None, Leak::MK, Leak::EK}) {
           for (Defense defense : {Defense::None, Defense::Integrity}) {
             const bool want = leak == Leak::MK && defense == Defense::None;
             if ((lab("hijack", leak, defense).outcome == "success") != want) return false;
           }
         }
         return true;
       }},
      {"hijack blocked by integrity",
       [] {
         return lab("hijack", Leak::MK, Defense::Integrity).summary.value("reason", std::string()) ==
                "IntegrityFailure";
       }},
      {"replay after ttl",
       [] { return lab("replay", Leak::MK, Defense::None, {{"delay", 301}}).outcome == "blocked"; }},
      {"LT at +301 s and on reuse",
       [] {
         const auto lt = lab("lt_expiry", Leak::MK, Defense::None, {{"delay", 301}});
         return lt.summary.value("expired_rejected", false) && lt.summary.value("reuse_rejected", false);
       }},
      {"AT at +7201 s",
       [] {
         return lab("at_expiry", Leak::MK, Defense::None, {{"delay", 7201}}).summary.value("error", std::string()) ==
                "AtExpired";
       }},
      {"same EK within ttl", [] { return lab("same_ek", Leak::MK, Defense::None).outcome == "same"; }},
      {"service theft 1e6 x $1000/1M = $1000.00",
       [] {
         const auto r = lab("service_theft", Leak::MK, Defense::None,
                            {{"service", "openapi.ocr.idCard"}, {"n", 1000000}});
         return r.summary.value("cost", -1.0) == 1000.0;
       }},
      {"WeRun step=100000",
       [] {
         const auto r = lab("promotion", Leak::MK, Defense::None, {{"variant", "werun"}});
         for (const auto& e : r.transcript.events()) {
           if (e.op == "redeem_steps" && e.detail.value("step", 0) == 100000) return true;
         }
         return false;
       }},
      {"deterministic",
       [] {
         return lab("hijack", Leak::MK, Defense::None).transcript.to_jsonl() ==
                lab("hijack", Leak::MK, Defense::None).transcript.to_jsonl();
       }},
  };

  std::size_t ok = 0;
  std::string failed;
  for (const auto& [name, fn] : checks) {
    std::string why;
    bool pass = false;
    try {
      pass = fn();
    } catch (const std::exception& e) {
      why = std::string(" (") + e.what() + ")";
    }
    if (pass) ++ok;
    else failed += "; failed: " + name + why;
  }
  return {ok == checks.size(), std::to_string(ok) + "/" + std::to_string(checks.size()) + " cells" + failed};
}

// ---- package format ------------------------------------------------------------------

Outcome package_format() {
  std::mt19937_64 rng(1000);
  int exact = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<pkg::FileEntry> entries;
    const int n = static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      pkg::Bytes data(rng() % 300);
      for (auto& b : data) b = static_cast<std::uint8_t>(rng());
      entries.push_back({"d" + std::to_string(rng() % 4) + "/f" + std::to_string(i) + ".bin", data});
    }
    const pkg::Bytes bytes = pkg::pack(entries);
    const pkg::Package back = pkg::unpack(bytes);
    if (back.entries() == entries && pkg::pack(back.entries()) == bytes) ++exact;
  }

  const std::vector<pkg::FileEntry> three = {
      pkg::make_entry("app.js", "App({});\n"), pkg::make_entry("pages/index/index.js", "Page({});\n"),
      pkg::make_entry("project.config.json", "{\"appid\":\"wx0123456789abcdef\"}")};
  const pkg::Bytes bytes = pkg::pack(three);
  std::size_t errored = 0;
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    try {
      pkg::unpack(std::span<const std::uint8_t>(bytes.data(), len));
    } catch (const pkg::PackageError&) {
      ++errored;
    }
  }
  std::ostringstream d;
  d << exact << "/1000 roundtrips bit-exact, " << errored << "/" << bytes.size() << " truncations error";
  return {exact == 1000 && errored == bytes.size(), d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"planted corpus oracle", planted_corpus},
      {"figure fixtures", figure_fixtures},
      {"session key url table", url_table},
      {"secret validation soundness", secret_validation},
      {"crypto", crypto_checks},
      {"protocol lab matrix", lab_matrix},
      {"package format", package_format},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / ("coffeescan-acceptance-" + std::to_string(getpid())));
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
