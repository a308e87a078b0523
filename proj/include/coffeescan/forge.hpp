#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coffeescan/detectors.hpp"
#include "coffeescan/keyval.hpp"
#include "coffeescan/pkg.hpp"

// Synthetic package corpora with planted vulnerabilities and a manifest
// listing every planted site.
namespace coffeescan::forge {

using nlohmann::json;
using detectors::DetectorKind;

enum class Obfuscation { Plain, Renamed, Detached, Ternary };

inline constexpr std::array<Obfuscation, 4> kAllObfuscations = {Obfuscation::Plain, Obfuscation::Renamed,
                                                                Obfuscation::Detached, Obfuscation::Ternary};

const char* to_string(Obfuscation o);
std::optional<Obfuscation> parse_obfuscation(std::string_view name);

struct PlantRequest {
  DetectorKind detector;
  std::size_t count = 1;
  std::optional<Obfuscation> obfuscation;  // mixed when unset
};

/// "BleMisconfig:3,SessionKeyUrl:2@detached". Throws std::invalid_argument.
std::vector<PlantRequest> parse_plants(std::string_view spec);

struct ForgeOptions {
  std::uint64_t seed = 1;
  std::size_t n_clean = 150;
  /// Used when `plants` is empty: packages with 2-4 random plants each,
  /// covering every detector.
  std::size_t n_vulnerable = 50;
  std::size_t min_plants = 2;
  std::size_t max_plants = 4;
  std::vector<PlantRequest> plants;
};

struct Plant {
  DetectorKind detector;
  std::string file;
  std::uint32_t line = 0;  // span hint
  Obfuscation obfuscation = Obfuscation::Plain;
  std::optional<std::string> secret;
};

struct ForgedPackage {
  std::string id;
  std::string appid;
  std::string master_key;  // the app's real secret, registered with the mock
  pkg::Package package;
  std::vector<Plant> plants;
};

struct Corpus {
  std::uint64_t seed = 0;
  std::vector<ForgedPackage> packages;
};

Corpus generate(const ForgeOptions& options);

json manifest(const Corpus& corpus);
/// Mock registrations for every package; planted secrets are the real keys.
keyval::MockSeed registrations(const Corpus& corpus);

/// Writes <id>.mapkg files, manifest.json and registrations.json.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// (file, detector) multiset of a manifest package entry or of findings.
using PlantKey = std::pair<std::string, std::string>;
std::multiset<PlantKey> manifest_keys(const json& package_entry);

}  // namespace coffeescan::forge
