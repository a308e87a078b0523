#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coffeescan/detectors.hpp"
#include "coffeescan/keyval.hpp"
#include "coffeescan/pkg.hpp"

// Package and corpus scanning, reports and their renderings.
namespace coffeescan::scan {

using nlohmann::json;
using detectors::DetectorKind;
using detectors::Finding;

inline constexpr int kReportVersion = 1;

struct ScanOptions {
  detectors::DetectorConfig config;
  std::set<DetectorKind> enabled{detectors::kAllDetectors.begin(), detectors::kAllDetectors.end()};
  /// When set, AppSecret candidates are confirmed through this client.
  keyval::ValidationClient* validator = nullptr;
};

struct ScanStats {
  std::size_t files = 0;
  std::size_t parsed_files = 0;
  std::size_t unparsed_files = 0;
  std::size_t candidates_validated = 0;
  std::map<std::string, std::size_t> verdicts;  // Valid / Invalid / Indeterminate
};

struct ReportedFinding {
  Finding finding;
  std::optional<keyval::Verdict> verdict;
};

struct ScanReport {
  std::string package;
  std::optional<std::string> appid;
  std::vector<ReportedFinding> findings;
  std::vector<detectors::UnparsedFile> unparsed;
  ScanStats stats;
  double duration_ms = 0;
  std::optional<std::string> error;  // input could not be read
};

/// Runs the detectors over one package and validates distinct candidates.
ScanReport scan_package(const pkg::Package& package, const std::string& id, const ScanOptions& options);

/// One scannable unit: a .mapkg file or an unpacked directory.
struct Input {
  std::string id;
  std::filesystem::path path;
};

/// Expands paths: a directory holding .mapkg files is a corpus (one input
/// per file, sorted); any other directory or file is a single input.
std::vector<Input> expand_inputs(const std::vector<std::filesystem::path>& paths);

/// Reads and scans; read failures are recorded in ScanReport::error.
ScanReport scan_input(const Input& input, const ScanOptions& options);

/// Reference implementation: one package after another.
std::vector<ScanReport> scan_corpus_serial(const std::vector<Input>& inputs, const ScanOptions& options);
/// OpenMP fan-out, one package per task. Output order matches the inputs.
std::vector<ScanReport> scan_corpus_parallel(const std::vector<Input>& inputs, const ScanOptions& options,
                                             int jobs = 0);

// ---- reports ------------------------------------------------------------------------

json to_json(const Finding& f);
json to_json(const ReportedFinding& f);
json to_json(const ScanReport& r);
/// Full document: {"version", "reports", "summary"}.
json report_document(const std::vector<ScanReport>& reports);

/// Counts recomputed from report documents. Throws std::invalid_argument on
/// a version or shape mismatch.
struct Summary {
  std::size_t packages = 0;
  std::size_t packages_with_findings = 0;
  std::size_t findings = 0;
  std::size_t errors = 0;
  std::map<std::string, std::size_t> by_detector;
  std::map<std::string, std::size_t> verdicts;  // per finding
};

Summary summarize(const std::vector<ScanReport>& reports);
Summary summarize_document(const json& document);
Summary merge(const std::vector<Summary>& parts);
json to_json(const Summary& s);

std::string render_text(const std::vector<ScanReport>& reports);
std::string render_summary_text(const Summary& s);

}  // namespace coffeescan::scan
