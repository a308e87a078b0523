#pragma once

#include <array>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coffeescan/flow.hpp"
#include "coffeescan/minijs.hpp"
#include "coffeescan/pkg.hpp"

namespace coffeescan::detectors {

enum class DetectorKind {
  BleMisconfig,
  MissingCrossAppCheck,
  MissingPrivateShareCheck,
  AppSecretString,
  AppSecretInUrl,
  SessionKeyUrl,
  SessionKeyMissingNetwork,
};

inline constexpr std::array<DetectorKind, 7> kAllDetectors = {
    DetectorKind::BleMisconfig,     DetectorKind::MissingCrossAppCheck,
    DetectorKind::MissingPrivateShareCheck, DetectorKind::AppSecretString,
    DetectorKind::AppSecretInUrl,   DetectorKind::SessionKeyUrl,
    DetectorKind::SessionKeyMissingNetwork};

const char* to_string(DetectorKind kind);
std::optional<DetectorKind> parse_detector(std::string_view name);

enum class Confidence { High, Medium, Low };

const char* to_string(Confidence c);
std::optional<Confidence> parse_confidence(std::string_view name);

struct Finding {
  DetectorKind detector = DetectorKind::BleMisconfig;
  std::string file;
  minijs::SourceSpan span;
  std::string evidence;
  Confidence confidence = Confidence::High;
  std::optional<std::string> candidate_secret;  // AppSecret* only
};

/// Report order: file, then span start, then detector.
bool finding_less(const Finding& a, const Finding& b);

struct DetectorConfig {
  std::string appid_pattern = "wx[0-9a-f]{16}";
  std::set<double> scene_codes_cross_user = {1038};
  std::set<std::string> sensitive_apis = {
      "getPhoneNumber", "getUserInfo",    "getUserProfile",    "getUserInteractiveStorage",
      "getWeRunData",   "getShareInfo",   "getGroupEnterInfo", "chooseInvoice",
      "authPrivateMessage"};
  std::set<std::string> network_apis = {"wx.request", "cloud.callFunction", "cloud.CloudID"};
  // APIs returning encrypted data, matched as calls
  std::set<std::string> encrypted_data_apis = {"getWeRunData", "getShareInfo",
                                               "getGroupEnterInfo", "getUserProfile"};
  // encrypted data delivered to a named page handler (button open-type)
  std::set<std::string> encrypted_data_handlers = {"getPhoneNumber"};
  std::string secret_regex = "[a-f0-9]{32}";
  std::string alt_secret_regex = "[a-zA-Z0-9]{32}";
  std::set<std::string> url_keyword_dictionary = {"get",  "set",   "new",  "session", "key",
                                                  "code", "js",    "wx",   "app",     "login",
                                                  "token", "user", "info"};
  bool baidu = false;  // selects alt_secret_regex

  const std::string& active_secret_regex() const { return baidu ? alt_secret_regex : secret_regex; }
  bool is_appid(std::string_view s) const;

  static DetectorConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

DetectorConfig load_config(const std::filesystem::path& path);

// ---- URL heuristics ------------------------------------------------------------

enum class UrlClass { None, Duplication, Getter };

const char* to_string(UrlClass c);

std::vector<std::string> word_segment(std::string_view s, const std::set<std::string>& dictionary);
UrlClass classify_url(std::string_view s, const DetectorConfig& cfg);

/// Heuristic for strings worth classifying: contains a '/' or a '?'.
bool looks_like_url(std::string_view s);

// ---- secret matching -----------------------------------------------------------

/// Matcher for the secret regex. A match is a maximal run: the characters on
/// both sides fall outside the pattern's character class.
class SecretMatcher {
 public:
  explicit SecretMatcher(const std::string& pattern);

  struct Match {
    std::size_t offset;
    std::string value;
  };
  std::vector<Match> find_all(std::string_view text) const;
  bool matches(std::string_view candidate) const;

 private:
  std::array<bool, 256> cls_{};
  std::size_t length_ = 0;
};

// ---- analysed package ----------------------------------------------------------

struct ParsedFile {
  std::string path;
  minijs::NodePtr ast;
  std::unique_ptr<flow::FileFlow> flow;
};

struct UnparsedFile {
  std::string path;
  std::string error;
};

/// Parses every `.js` entry and builds the package-wide flow view.
class AnalyzedPackage {
 public:
  explicit AnalyzedPackage(const pkg::Package& package);
  AnalyzedPackage(const AnalyzedPackage&) = delete;
  AnalyzedPackage& operator=(const AnalyzedPackage&) = delete;

  const pkg::Package& package() const { return *package_; }
  const std::vector<ParsedFile>& parsed() const { return parsed_; }
  const std::vector<UnparsedFile>& unparsed() const { return unparsed_; }
  const flow::PackageFlow& flow() const { return flow_; }

 private:
  const pkg::Package* package_;
  std::vector<ParsedFile> parsed_;
  std::vector<UnparsedFile> unparsed_;
  flow::PackageFlow flow_;
};

std::vector<Finding> detect_ble(const AnalyzedPackage& pkg);
std::vector<Finding> detect_cross_app(const AnalyzedPackage& pkg, const DetectorConfig& cfg);
std::vector<Finding> detect_private_share(const AnalyzedPackage& pkg);
std::vector<Finding> detect_appsecret(const pkg::Package& package, const DetectorConfig& cfg);
std::vector<Finding> detect_session_key(const AnalyzedPackage& pkg, const DetectorConfig& cfg);

/// Runs the selected detectors and returns findings in report order.
std::vector<Finding> run_detectors(const AnalyzedPackage& pkg, const DetectorConfig& cfg,
                                   const std::set<DetectorKind>& enabled);

/// App id of the package: project.config.json "appid", else the first
/// appid-shaped string in any entry.
std::optional<std::string> package_appid(const pkg::Package& package, const DetectorConfig& cfg);

/// True when `path` equals `api` or ends with "." + api.
bool api_matches(std::string_view path, std::string_view api);

}  // namespace coffeescan::detectors
