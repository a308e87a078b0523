#include <algorithm>

#include "coffeescan/detectors.hpp"

namespace coffeescan::detectors {

AnalyzedPackage::AnalyzedPackage(const pkg::Package& package) : package_(&package) {
  for (const pkg::FileEntry& entry : package.entries()) {
    if (!entry.path.ends_with(".js")) continue;
    try {
      ParsedFile f;
      f.path = entry.path;
      f.ast = minijs::parse(entry.text(), entry.path);
      f.flow = std::make_unique<flow::FileFlow>(*f.ast, entry.path);
      parsed_.push_back(std::move(f));
    } catch (const minijs::ParseError& e) {
      unparsed_.push_back({entry.path, e.what()});
    }
  }
  for (const ParsedFile& f : parsed_) flow_.add(f.flow.get());
}

bool api_matches(std::string_view path, std::string_view api) {
  if (path == api) return true;
  return path.size() > api.size() && path.ends_with(api) && path[path.size() - api.size() - 1] == '.';
}

std::vector<Finding> run_detectors(const AnalyzedPackage& pkg, const DetectorConfig& cfg,
                                   const std::set<DetectorKind>& enabled) {
  std::vector<Finding> all;
  auto take = [&](std::vector<Finding> found) {
    for (Finding& f : found) {
      if (enabled.count(f.detector)) all.push_back(std::move(f));
    }
  };
  auto any = [&](std::initializer_list<DetectorKind> kinds) {
    return std::any_of(kinds.begin(), kinds.end(), [&](DetectorKind k) { return enabled.count(k) > 0; });
  };
  if (any({DetectorKind::BleMisconfig})) take(detect_ble(pkg));
  if (any({DetectorKind::MissingCrossAppCheck})) take(detect_cross_app(pkg, cfg));
  if (any({DetectorKind::MissingPrivateShareCheck})) take(detect_private_share(pkg));
  if (any({DetectorKind::AppSecretString, DetectorKind::AppSecretInUrl})) {
    take(detect_appsecret(pkg.package(), cfg));
  }
  if (any({DetectorKind::SessionKeyUrl, DetectorKind::SessionKeyMissingNetwork})) {
    take(detect_session_key(pkg, cfg));
  }
  std::stable_sort(all.begin(), all.end(), finding_less);
  return all;
}

std::optional<std::string> package_appid(const pkg::Package& package, const DetectorConfig& cfg) {
  if (const pkg::FileEntry* config = package.find("project.config.json")) {
    const auto j = nlohmann::json::parse(config->text(), nullptr, false);
    if (j.is_object() && j.contains("appid") && j["appid"].is_string()) {
      return j["appid"].get<std::string>();
    }
  }
  for (const pkg::FileEntry& entry : package.entries()) {
    const std::string_view text = entry.text();
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
      if (text[i] != 'w' || text[i + 1] != 'x') continue;
      if (i > 0 && std::isalnum(static_cast<unsigned char>(text[i - 1]))) continue;
      std::size_t j = i;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
      const std::string_view word = text.substr(i, j - i);
      if (cfg.is_appid(word)) return std::string(word);
    }
  }
  return std::nullopt;
}

}  // namespace coffeescan::detectors
