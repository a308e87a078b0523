#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "coffeescan/forge.hpp"
#include "coffeescan/scan.hpp"
#include "fixtures.hpp"

using namespace coffeescan;
using namespace coffeescan::scan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("coffeescan-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::multiset<forge::PlantKey> finding_keys(const ScanReport& r) {
  std::multiset<forge::PlantKey> out;
  for (const auto& f : r.findings) out.insert({f.finding.file, detectors::to_string(f.finding.detector)});
  return out;
}

// Mismatch count between a forged corpus and its scan, printing details.
std::size_t mismatches(const forge::Corpus& corpus, const ScanOptions& options) {
  std::size_t bad = 0;
  for (const auto& p : corpus.packages) {
    const ScanReport r = scan_package(p.package, p.id, options);
    std::multiset<forge::PlantKey> expected;
    for (const auto& pl : p.plants) expected.insert({pl.file, detectors::to_string(pl.detector)});
    const auto got = finding_keys(r);
    bool lines_ok = true;
    for (const auto& pl : p.plants) {
      const bool hit = std::any_of(r.findings.begin(), r.findings.end(), [&](const ReportedFinding& f) {
        return f.finding.file == pl.file && f.finding.detector == pl.detector && f.finding.span.start_line == pl.line;
      });
      lines_ok = lines_ok && hit;
    }
    if (got != expected || !lines_ok) {
      ++bad;
      MESSAGE("package " << p.id);
      for (const auto& pl : p.plants) {
        MESSAGE("  planted " << detectors::to_string(pl.detector) << " " << pl.file << ":" << pl.line << " "
                             << forge::to_string(pl.obfuscation));
      }
      for (const auto& f : r.findings) {
        MESSAGE("  found " << detectors::to_string(f.finding.detector) << " " << f.finding.file << ":"
                           << f.finding.span.start_line << " " << f.finding.evidence);
      }
      for (const auto& u : r.unparsed) MESSAGE("  unparsed " << u.path << " " << u.error);
    }
  }
  return bad;
}

}  // namespace

TEST_CASE("every plant template at every obfuscation level is recovered") {
  for (DetectorKind k : detectors::kAllDetectors) {
    for (forge::Obfuscation o : forge::kAllObfuscations) {
      forge::ForgeOptions opt;
      opt.seed = 100 + static_cast<int>(k) * 10 + static_cast<int>(o);
      opt.n_clean = 0;
      opt.plants = {{k, 1, o}};
      const forge::Corpus corpus = forge::generate(opt);
      REQUIRE(corpus.packages.size() == 1);
      CHECK_MESSAGE(mismatches(corpus, {}) == 0, detectors::to_string(k) << "@" << forge::to_string(o));
    }
  }
}

TEST_CASE("clean packages have no findings") {
  forge::ForgeOptions opt;
  opt.seed = 9;
  opt.n_clean = 60;
  opt.n_vulnerable = 0;
  const forge::Corpus corpus = forge::generate(opt);
  CHECK(corpus.packages.size() == 60);
  CHECK(mismatches(corpus, {}) == 0);
}

TEST_CASE("mixed corpus matches its manifest") {
  forge::ForgeOptions opt;
  opt.seed = 2024;
  opt.n_clean = 20;
  opt.n_vulnerable = 30;
  const forge::Corpus corpus = forge::generate(opt);
  CHECK(mismatches(corpus, {}) == 0);
}

TEST_CASE("forge is deterministic and honours plant specs") {
  forge::ForgeOptions opt;
  opt.seed = 77;
  opt.n_clean = 3;
  opt.plants = forge::parse_plants("BleMisconfig:3,MissingCrossAppCheck:2@ternary,SessionKeyUrl");
  const forge::Corpus a = forge::generate(opt);
  const forge::Corpus b = forge::generate(opt);
  REQUIRE(a.packages.size() == b.packages.size());
  for (std::size_t i = 0; i < a.packages.size(); ++i) {
    CHECK(pkg::pack(a.packages[i].package.entries()) == pkg::pack(b.packages[i].package.entries()));
  }
  const json m = forge::manifest(a);
  CHECK(m == forge::manifest(b));
  std::map<std::string, int> counts;
  for (const auto& p : m["packages"]) {
    int cross = 0;
    for (const auto& pl : p["plants"]) {
      ++counts[pl["detector"].get<std::string>()];
      if (pl["detector"] == "MissingCrossAppCheck") {
        ++cross;
        CHECK(pl["obfuscation"] == "ternary");
      }
    }
    CHECK(cross <= 1);
  }
  CHECK(counts == std::map<std::string, int>{{"BleMisconfig", 3}, {"MissingCrossAppCheck", 2}, {"SessionKeyUrl", 1}});
  CHECK(m["total_plants"] == 6);

  opt.seed = 78;
  CHECK(forge::manifest(forge::generate(opt)) != m);
}

TEST_CASE("plant spec parsing") {
  const auto p = forge::parse_plants("AppSecretInUrl:2@detached,BleMisconfig");
  REQUIRE(p.size() == 2);
  CHECK(p[0].detector == DetectorKind::AppSecretInUrl);
  CHECK(p[0].count == 2);
  CHECK(p[0].obfuscation == forge::Obfuscation::Detached);
  CHECK(p[1].count == 1);
  CHECK_FALSE(p[1].obfuscation);
  CHECK_THROWS_AS(forge::parse_plants("Nope:1"), std::invalid_argument);
  CHECK_THROWS_AS(forge::parse_plants("BleMisconfig:x"), std::invalid_argument);
  CHECK_THROWS_AS(forge::parse_plants("BleMisconfig@scrambled"), std::invalid_argument);
}

TEST_CASE("default corpus covers every detector and obfuscation") {
  forge::ForgeOptions opt;
  opt.seed = 5;
  const forge::Corpus corpus = forge::generate(opt);
  CHECK(corpus.packages.size() == 200);
  std::set<DetectorKind> kinds;
  std::set<forge::Obfuscation> levels;
  std::size_t vulnerable = 0;
  for (const auto& p : corpus.packages) {
    if (p.plants.empty()) continue;
    ++vulnerable;
    CHECK(p.plants.size() >= 2);
    CHECK(p.plants.size() <= 4);
    for (const auto& pl : p.plants) {
      kinds.insert(pl.detector);
      levels.insert(pl.obfuscation);
    }
  }
  CHECK(vulnerable == 50);
  CHECK(kinds.size() == 7);
  CHECK(levels.size() == 4);
}

TEST_CASE("serial and parallel corpus scans agree") {
  const fs::path dir = temp_dir("par");
  forge::ForgeOptions opt;
  opt.seed = 31;
  opt.n_clean = 12;
  opt.n_vulnerable = 12;
  forge::write_corpus(forge::generate(opt), dir);
  const auto inputs = expand_inputs({dir});
  REQUIRE(inputs.size() == 24);
  CHECK(inputs.front().id == "pkg-0001");
  const auto serial = scan_corpus_serial(inputs, {});
  for (int jobs : {1, 2, 4}) {
    const auto parallel = scan_corpus_parallel(inputs, {}, jobs);
    REQUIRE(parallel.size() == serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      json a = to_json(serial[i]), b = to_json(parallel[i]);
      a.erase("duration_ms");
      b.erase("duration_ms");
      CHECK(a == b);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("inputs: single files, directories and errors") {
  const fs::path dir = temp_dir("inputs");
  const fs::path tree = dir / "tree";
  fs::create_directories(tree);
  std::ofstream(tree / "app.js") << "var s = \"0123456789abcdef0123456789abcdef\";\n";
  pkg::write_file(dir / "one.mapkg", pkg::read_directory(tree));

  const auto inputs = expand_inputs({tree, dir / "one.mapkg", dir / "missing.mapkg"});
  REQUIRE(inputs.size() == 3);
  CHECK(inputs[0].id == "tree");
  CHECK(inputs[1].id == "one");
  const auto reports = scan_corpus_serial(inputs, {});
  CHECK(reports[0].findings.size() == 1);
  CHECK(reports[1].findings.size() == 1);
  CHECK(reports[2].error.has_value());

  std::ofstream(dir / "bad.mapkg", std::ios::binary) << "garbage";
  CHECK(scan_input({"bad", dir / "bad.mapkg"}, {}).error.has_value());
  fs::remove_all(dir);
}

TEST_CASE("detector selection") {
  const pkg::Package p = pkg::read_directory(fixture_path("figures/case3"));
  ScanOptions only;
  only.enabled = {DetectorKind::SessionKeyUrl};
  const ScanReport r = scan_package(p, "case3", only);
  REQUIRE(r.findings.size() == 1);
  CHECK(r.findings[0].finding.detector == DetectorKind::SessionKeyUrl);
  CHECK(scan_package(p, "case3", {}).findings.size() == 2);
}

TEST_CASE("validation runs once per distinct candidate") {
  const std::string appid = "wx00112233445566aa";
  const std::string mk = "a1b2c3d4e5f60718293a4b5c6d7e8f90";
  const std::string decoy = "ffffffffffffffffffffffffffffffff";
  std::vector<pkg::FileEntry> entries = {
      pkg::make_entry("project.config.json", "{\"appid\": \"" + appid + "\"}"),
      pkg::make_entry("a.js", "var k = \"" + mk + "\";\nvar d = \"" + decoy + "\";\n"),
      pkg::make_entry("b.js", "var again = \"" + mk + "\";\n"),
  };
  const pkg::Package p(std::move(entries));

  keyval::MockSeed seed;
  seed.registrations.push_back({appid, mk, {}});
  auto mock = std::make_shared<keyval::MockPlatform>(seed);
  keyval::MockServer server(mock);
  server.start();
  keyval::ValidationClient client(server.url(), std::make_shared<keyval::RateLimiter>(keyval::RateLimitPolicy::unlimited()));
  ScanOptions options;
  options.validator = &client;
  const ScanReport r = scan_package(p, "v", options);
  CHECK(r.findings.size() == 3);
  CHECK(r.stats.candidates_validated == 2);
  CHECK(mock->token_requests() == 2);
  CHECK(r.stats.verdicts.at("Valid") == 1);
  CHECK(r.stats.verdicts.at("Invalid") == 1);
  for (const auto& f : r.findings) {
    REQUIRE(f.verdict);
    CHECK((f.verdict->kind == keyval::Verdict::Kind::Valid) == (*f.finding.candidate_secret == mk));
  }
  const json j = to_json(r);
  CHECK(j["findings"][0].contains("validation"));

  std::vector<pkg::FileEntry> no_id = {pkg::make_entry("a.js", "var k = \"" + mk + "\";\n")};
  const ScanReport orphan = scan_package(pkg::Package(std::move(no_id)), "o", options);
  REQUIRE(orphan.findings.size() == 1);
  CHECK(orphan.findings[0].verdict->kind == keyval::Verdict::Kind::Indeterminate);
  CHECK(mock->token_requests() == 2);
}

TEST_CASE("report documents, summaries and merge") {
  const pkg::Package case1 = pkg::read_directory(fixture_path("figures/case1"));
  const pkg::Package case3 = pkg::read_directory(fixture_path("figures/case3"));
  const std::vector<ScanReport> a = {scan_package(case1, "case1", {})};
  const std::vector<ScanReport> b = {scan_package(case3, "case3", {}), scan_package(case1, "again", {})};
  const json da = report_document(a), db = report_document(b);
  CHECK(da["version"] == 1);
  CHECK(da["summary"]["by_detector"]["BleMisconfig"] == 1);

  const Summary merged = merge({summarize_document(da), summarize_document(db)});
  CHECK(merged.packages == 3);
  CHECK(merged.findings == 4);
  CHECK(merged.by_detector.at("BleMisconfig") == 2);
  CHECK(merged.by_detector.at("AppSecretString") == 1);
  CHECK(merged.by_detector.at("SessionKeyUrl") == 1);

  // text and json renderings agree on counts
  const Summary direct = summarize(b);
  CHECK(to_json(direct) == to_json(summarize_document(db)));
  const std::string text = render_text(b);
  CHECK(text.find("findings: 3") != std::string::npos);
  CHECK(text.find("BleMisconfig              1") != std::string::npos);

  const Summary empty = merge({});
  CHECK(empty.packages == 0);
  CHECK(to_json(empty)["by_detector"]["AppSecretInUrl"] == 0);

  CHECK_THROWS_AS(summarize_document(json{{"version", 2}, {"reports", json::array()}}), std::invalid_argument);
  CHECK_THROWS_AS(summarize_document(json::array()), std::invalid_argument);
  json bad = da;
  bad["reports"][0]["findings"][0]["detector"] = "Nope";
  CHECK_THROWS_AS(summarize_document(bad), std::invalid_argument);
}

TEST_CASE("dead code does not change findings") {
  forge::ForgeOptions opt;
  opt.seed = 404;
  opt.n_clean = 4;
  opt.n_vulnerable = 4;
  for (const auto& p : forge::generate(opt).packages) {
    const auto before = finding_keys(scan_package(p.package, p.id, {}));
    std::vector<pkg::FileEntry> entries = p.package.entries();
    entries.push_back(pkg::make_entry("utils/unused.js",
                                      "function neverCalled(a, b) {\n  var t = a + b;\n  return t * 2;\n}\n"));
    const auto after = finding_keys(scan_package(pkg::Package(std::move(entries)), p.id, {}));
    CHECK(before == after);
  }
}
