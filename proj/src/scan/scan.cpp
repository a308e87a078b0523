#include <algorithm>
#include <sstream>

#include <omp.h>

#include "coffeescan/scan.hpp"

namespace coffeescan::scan {

namespace fs = std::filesystem;
using detectors::Finding;

namespace {

bool is_secret_finding(const Finding& f) {
  return f.detector == DetectorKind::AppSecretString || f.detector == DetectorKind::AppSecretInUrl;
}

}  // namespace

ScanReport scan_package(const pkg::Package& package, const std::string& id, const ScanOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ScanReport report;
  report.package = id;
  report.appid = detectors::package_appid(package, options.config);

  const detectors::AnalyzedPackage analyzed(package);
  report.stats.files = package.size();
  report.stats.parsed_files = analyzed.parsed().size();
  report.stats.unparsed_files = analyzed.unparsed().size();
  report.unparsed = analyzed.unparsed();

  for (Finding& f : detectors::run_detectors(analyzed, options.config, options.enabled)) {
    report.findings.push_back({std::move(f), std::nullopt});
  }

  if (options.validator) {
    std::map<std::string, keyval::Verdict> verdicts;
    for (const ReportedFinding& rf : report.findings) {
      if (!is_secret_finding(rf.finding) || !rf.finding.candidate_secret) continue;
      const std::string& candidate = *rf.finding.candidate_secret;
      if (verdicts.count(candidate)) continue;
      keyval::Verdict v = report.appid ? options.validator->validate(*report.appid, candidate)
                                       : keyval::Verdict::indeterminate("no appid");
      ++report.stats.candidates_validated;
      ++report.stats.verdicts[keyval::to_string(v.kind)];
      verdicts.emplace(candidate, std::move(v));
    }
    for (ReportedFinding& rf : report.findings) {
      if (rf.finding.candidate_secret && is_secret_finding(rf.finding)) {
        rf.verdict = verdicts.at(*rf.finding.candidate_secret);
      }
    }
  }
  report.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<Input> expand_inputs(const std::vector<fs::path>& paths) {
  std::vector<Input> out;
  for (const fs::path& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> packages;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".mapkg") packages.push_back(e.path());
      }
      if (!packages.empty()) {
        std::sort(packages.begin(), packages.end());
        for (const fs::path& f : packages) out.push_back({f.stem().string(), f});
        continue;
      }
    }
    std::string id = p.filename().string();
    if (id.empty()) id = p.parent_path().filename().string();
    if (p.extension() == ".mapkg") id = p.stem().string();
    out.push_back({id, p});
  }
  return out;
}

ScanReport scan_input(const Input& input, const ScanOptions& options) {
  try {
    if (!fs::exists(input.path)) throw std::runtime_error("no such file or directory");
    const pkg::Package package =
        fs::is_directory(input.path) ? pkg::read_directory(input.path) : pkg::read_file(input.path);
    return scan_package(package, input.id, options);
  } catch (const std::exception& e) {
    ScanReport report;
    report.package = input.id;
    report.error = input.path.string() + ": " + e.what();
    return report;
  }
}

std::vector<ScanReport> scan_corpus_serial(const std::vector<Input>& inputs, const ScanOptions& options) {
  std::vector<ScanReport> reports;
  reports.reserve(inputs.size());
  for (const Input& in : inputs) reports.push_back(scan_input(in, options));
  return reports;
}

std::vector<ScanReport> scan_corpus_parallel(const std::vector<Input>& inputs, const ScanOptions& options,
                                             int jobs) {
  std::vector<ScanReport> reports(inputs.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    reports[static_cast<std::size_t>(i)] = scan_input(inputs[static_cast<std::size_t>(i)], options);
  }
  return reports;
}

// ---- reports ------------------------------------------------------------------------

namespace {

json span_json(const minijs::SourceSpan& s) {
  return {{"start_line", s.start_line}, {"start_col", s.start_col}, {"end_line", s.end_line}, {"end_col", s.end_col}};
}

}  // namespace

json to_json(const Finding& f) {
  json j = {{"detector", detectors::to_string(f.detector)},
            {"file", f.file},
            {"span", span_json(f.span)},
            {"evidence", f.evidence},
            {"confidence", detectors::to_string(f.confidence)}};
  if (f.candidate_secret) j["candidate_secret"] = *f.candidate_secret;
  return j;
}

json to_json(const ReportedFinding& f) {
  json j = to_json(f.finding);
  if (f.verdict) j["validation"] = keyval::to_json(*f.verdict);
  return j;
}

json to_json(const ScanReport& r) {
  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));
  json unparsed = json::array();
  for (const auto& u : r.unparsed) unparsed.push_back({{"file", u.path}, {"error", u.error}});
  json j = {{"package", r.package},
            {"appid", r.appid ? json(*r.appid) : json(nullptr)},
            {"findings", findings},
            {"unparsed", unparsed},
            {"stats",
             {{"files", r.stats.files},
              {"parsed_files", r.stats.parsed_files},
              {"unparsed_files", r.stats.unparsed_files},
              {"candidates_validated", r.stats.candidates_validated},
              {"verdicts", r.stats.verdicts}}},
            {"duration_ms", r.duration_ms}};
  if (r.error) j["error"] = *r.error;
  return j;
}

Summary summarize(const std::vector<ScanReport>& reports) {
  Summary s;
  for (const ScanReport& r : reports) {
    ++s.packages;
    if (r.error) ++s.errors;
    if (!r.findings.empty()) ++s.packages_with_findings;
    s.findings += r.findings.size();
    for (const auto& f : r.findings) {
      ++s.by_detector[detectors::to_string(f.finding.detector)];
      if (f.verdict) ++s.verdicts[keyval::to_string(f.verdict->kind)];
    }
  }
  return s;
}

json to_json(const Summary& s) {
  json by = json::object();
  for (DetectorKind k : detectors::kAllDetectors) {
    const char* name = detectors::to_string(k);
    by[name] = s.by_detector.count(name) ? s.by_detector.at(name) : 0;
  }
  return {{"packages", s.packages},
          {"packages_with_findings", s.packages_with_findings},
          {"findings", s.findings},
          {"errors", s.errors},
          {"by_detector", by},
          {"verdicts", s.verdicts}};
}

json report_document(const std::vector<ScanReport>& reports) {
  json list = json::array();
  for (const auto& r : reports) list.push_back(to_json(r));
  return {{"version", kReportVersion}, {"reports", list}, {"summary", to_json(summarize(reports))}};
}

Summary summarize_document(const json& doc) {
  auto fail = [](const std::string& why) { throw std::invalid_argument("report: " + why); };
  if (!doc.is_object()) fail("not an object");
  if (!doc.contains("version") || doc["version"] != kReportVersion) fail("unsupported version");
  if (!doc.contains("reports") || !doc["reports"].is_array()) fail("missing reports");
  Summary s;
  for (const json& r : doc["reports"]) {
    if (!r.is_object() || !r.contains("package") || !r.contains("findings") || !r["findings"].is_array()) {
      fail("malformed package report");
    }
    ++s.packages;
    if (r.contains("error")) ++s.errors;
    if (!r["findings"].empty()) ++s.packages_with_findings;
    for (const json& f : r["findings"]) {
      if (!f.is_object() || !f.contains("detector") || !f["detector"].is_string() ||
          !detectors::parse_detector(f["detector"].get<std::string>())) {
        fail("unknown detector");
      }
      ++s.findings;
      ++s.by_detector[f["detector"].get<std::string>()];
      if (f.contains("validation")) ++s.verdicts[f["validation"].at("verdict").get<std::string>()];
    }
  }
  return s;
}

Summary merge(const std::vector<Summary>& parts) {
  Summary s;
  for (const Summary& p : parts) {
    s.packages += p.packages;
    s.packages_with_findings += p.packages_with_findings;
    s.findings += p.findings;
    s.errors += p.errors;
    for (const auto& [k, n] : p.by_detector) s.by_detector[k] += n;
    for (const auto& [k, n] : p.verdicts) s.verdicts[k] += n;
  }
  return s;
}

std::string render_summary_text(const Summary& s) {
  std::ostringstream out;
  out << "packages: " << s.packages << "  with findings: " << s.packages_with_findings
      << "  findings: " << s.findings << "  errors: " << s.errors << "\n";
  for (DetectorKind k : detectors::kAllDetectors) {
    const char* name = detectors::to_string(k);
    const std::size_t n = s.by_detector.count(name) ? s.by_detector.at(name) : 0;
    out << "  " << name << std::string(26 - std::string(name).size(), ' ') << n << "\n";
  }
  for (const auto& [k, n] : s.verdicts) out << "  verdict " << k << ": " << n << "\n";
  return out.str();
}

std::string render_text(const std::vector<ScanReport>& reports) {
  std::ostringstream out;
  for (const ScanReport& r : reports) {
    if (r.error) {
      out << r.package << ": error: " << *r.error << "\n";
      continue;
    }
    for (const auto& rf : r.findings) {
      const Finding& f = rf.finding;
      out << r.package << ":" << f.file << ":" << f.span.start_line << ":" << f.span.start_col << ": "
          << detectors::to_string(f.detector) << " (" << detectors::to_string(f.confidence) << ") "
          << f.evidence;
      if (rf.verdict) out << " [" << keyval::to_string(rf.verdict->kind) << "]";
      out << "\n";
    }
    for (const auto& u : r.unparsed) out << r.package << ":" << u.path << ": unparsed: " << u.error << "\n";
  }
  out << render_summary_text(summarize(reports));
  return out.str();
}

}  // namespace coffeescan::scan
