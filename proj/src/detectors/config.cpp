#include <fstream>
#include <regex>

#include "coffeescan/detectors.hpp"

namespace coffeescan::detectors {

const char* to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::BleMisconfig: return "BleMisconfig";
    case DetectorKind::MissingCrossAppCheck: return "MissingCrossAppCheck";
    case DetectorKind::MissingPrivateShareCheck: return "MissingPrivateShareCheck";
    case DetectorKind::AppSecretString: return "AppSecretString";
    case DetectorKind::AppSecretInUrl: return "AppSecretInUrl";
    case DetectorKind::SessionKeyUrl: return "SessionKeyUrl";
    case DetectorKind::SessionKeyMissingNetwork: return "SessionKeyMissingNetwork";
  }
  return "?";
}

std::optional<DetectorKind> parse_detector(std::string_view name) {
  for (DetectorKind k : kAllDetectors) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

const char* to_string(Confidence c) {
  switch (c) {
    case Confidence::High: return "High";
    case Confidence::Medium: return "Medium";
    case Confidence::Low: return "Low";
  }
  return "?";
}

std::optional<Confidence> parse_confidence(std::string_view name) {
  for (Confidence c : {Confidence::High, Confidence::Medium, Confidence::Low}) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

bool finding_less(const Finding& a, const Finding& b) {
  if (a.file != b.file) return a.file < b.file;
  if (a.span.start_line != b.span.start_line) return a.span.start_line < b.span.start_line;
  if (a.span.start_col != b.span.start_col) return a.span.start_col < b.span.start_col;
  if (a.detector != b.detector) return a.detector < b.detector;
  return a.candidate_secret < b.candidate_secret;
}

bool DetectorConfig::is_appid(std::string_view s) const {
  // compiled per thread; std::regex is not cheap to build
  thread_local std::string cached_pattern;
  thread_local std::regex re;
  if (cached_pattern != appid_pattern) {
    re = std::regex(appid_pattern, std::regex::ECMAScript);
    cached_pattern = appid_pattern;
  }
  return std::regex_match(s.begin(), s.end(), re);
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void check_lowercase(const std::set<std::string>& words) {
  for (const auto& w : words) {
    for (char c : w) {
      if (c >= 'A' && c <= 'Z') {
        throw std::invalid_argument("url_keyword_dictionary entries must be lowercase: " + w);
      }
    }
  }
}

}  // namespace

DetectorConfig DetectorConfig::from_json(const nlohmann::json& j) {
  DetectorConfig cfg;
  read_field(j, "appid_pattern", cfg.appid_pattern);
  read_field(j, "scene_codes_cross_user", cfg.scene_codes_cross_user);
  read_field(j, "sensitive_apis", cfg.sensitive_apis);
  read_field(j, "network_apis", cfg.network_apis);
  read_field(j, "encrypted_data_apis", cfg.encrypted_data_apis);
  read_field(j, "encrypted_data_handlers", cfg.encrypted_data_handlers);
  read_field(j, "secret_regex", cfg.secret_regex);
  read_field(j, "alt_secret_regex", cfg.alt_secret_regex);
  read_field(j, "url_keyword_dictionary", cfg.url_keyword_dictionary);
  read_field(j, "baidu", cfg.baidu);
  check_lowercase(cfg.url_keyword_dictionary);
  SecretMatcher check_primary(cfg.secret_regex);
  SecretMatcher check_alt(cfg.alt_secret_regex);
  return cfg;
}

nlohmann::json DetectorConfig::to_json() const {
  return {{"appid_pattern", appid_pattern},
          {"scene_codes_cross_user", scene_codes_cross_user},
          {"sensitive_apis", sensitive_apis},
          {"network_apis", network_apis},
          {"encrypted_data_apis", encrypted_data_apis},
          {"encrypted_data_handlers", encrypted_data_handlers},
          {"secret_regex", secret_regex},
          {"alt_secret_regex", alt_secret_regex},
          {"url_keyword_dictionary", url_keyword_dictionary},
          {"baidu", baidu}};
}

DetectorConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return DetectorConfig::from_json(nlohmann::json::parse(in));
}

}  // namespace coffeescan::detectors
