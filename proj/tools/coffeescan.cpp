#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>

#include "coffeescan/forge.hpp"
#include "coffeescan/keyval.hpp"
#include "coffeescan/protolab.hpp"
#include "coffeescan/scan.hpp"

using namespace coffeescan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct ScanArgs {
  std::vector<std::string> paths;
  std::string format = "json";
  std::string detectors;
  bool validate = false;
  std::string endpoint;
  int jobs = 0;
  bool baidu = false;
  std::string config;
  std::string output;
  std::size_t rate = 60;
  std::size_t concurrency = 4;
};

int cmd_scan(const ScanArgs& a) {
  scan::ScanOptions options;
  if (!a.config.empty()) options.config = detectors::load_config(a.config);
  if (a.baidu) options.config.baidu = true;
  if (!a.detectors.empty()) {
    options.enabled.clear();
    std::stringstream ss(a.detectors);
    for (std::string name; std::getline(ss, name, ',');) {
      if (name.empty()) continue;
      auto kind = detectors::parse_detector(name);
      if (!kind) {
        std::cerr << "coffeescan: unknown detector '" << name << "'\n";
        return kExitError;
      }
      options.enabled.insert(*kind);
    }
  }
  std::unique_ptr<keyval::ValidationClient> client;
  if (a.validate) {
    const auto endpoint = keyval::resolve_endpoint(a.endpoint.empty() ? std::nullopt : std::optional(a.endpoint));
    if (!endpoint) {
      std::cerr << "coffeescan: --validate needs --endpoint or COFFEESCAN_ENDPOINT\n";
      return kExitError;
    }
    auto limiter = std::make_shared<keyval::RateLimiter>(
        keyval::RateLimitPolicy{a.rate, std::chrono::seconds(60), a.concurrency});
    keyval::ClientOptions copt;
    copt.baidu = options.config.baidu;
    client = std::make_unique<keyval::ValidationClient>(*endpoint, limiter, copt);
    options.validator = client.get();
  }

  std::vector<fs::path> paths(a.paths.begin(), a.paths.end());
  const auto inputs = scan::expand_inputs(paths);
  const auto reports = a.jobs == 1 ? scan::scan_corpus_serial(inputs, options)
                                   : scan::scan_corpus_parallel(inputs, options, a.jobs);

  bool error = false, findings = false;
  for (const auto& r : reports) {
    if (r.error) {
      error = true;
      std::cerr << "coffeescan: " << *r.error << "\n";
    }
    findings = findings || !r.findings.empty();
  }
  write_output(a.format == "text" ? scan::render_text(reports) : scan::report_document(reports).dump(2) + "\n",
               a.output);
  if (error) return kExitError;
  return findings ? kExitFindings : kExitClean;
}

struct ForgeArgs {
  std::string out = "corpus";
  std::uint64_t seed = 1;
  std::string plants;
  std::size_t clean = 150;
  std::size_t vulnerable = 50;
};

int cmd_forge(const ForgeArgs& a) {
  forge::ForgeOptions opt;
  opt.seed = a.seed;
  opt.n_clean = a.clean;
  opt.n_vulnerable = a.vulnerable;
  opt.plants = forge::parse_plants(a.plants);
  const forge::Corpus corpus = forge::generate(opt);
  forge::write_corpus(corpus, a.out);
  std::size_t plants = 0;
  for (const auto& p : corpus.packages) plants += p.plants.size();
  std::cerr << "forged " << corpus.packages.size() << " packages with " << plants << " plants into " << a.out
            << "\n";
  return kExitClean;
}

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  std::string seed;
  std::uint64_t rng_seed = 1;
  std::size_t quota = 0;
};

int cmd_serve(const ServeArgs& a) {
  const auto colon = a.addr.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("--addr must be host:port");
  const std::string host = a.addr.substr(0, colon);
  const int port = std::stoi(a.addr.substr(colon + 1));

  keyval::MockSeed seed;
  if (!a.seed.empty()) seed = keyval::parse_seed(read_json_file(a.seed));
  keyval::MockOptions options;
  options.seed = a.rng_seed;
  options.quota_per_window = a.quota;
  auto platform = std::make_shared<keyval::MockPlatform>(seed, options);
  keyval::MockServer server(platform);

  // Signals go to a watcher thread; the server threads inherit the mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "coffeescan: signal " << sig << ", draining\n";
    server.stop();
  });

  const bool ok = server.run(host, port, [&](int bound) {
    std::cout << "coffeescan mock server listening on http://" << host << ":" << bound << " ("
              << seed.registrations.size() << " registrations)" << std::endl;
  });
  if (!ok) {
    std::cerr << "coffeescan: cannot bind " << a.addr << "\n";
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    return kExitError;
  }
  watcher.join();
  std::cout << "coffeescan mock server stopped" << std::endl;
  return kExitClean;
}

int cmd_lab(const std::string& scenario_file) {
  protolab::ScenarioSpec spec;
  try {
    spec = protolab::parse_scenario(read_json_file(scenario_file));
  } catch (const std::exception& e) {
    std::cerr << "coffeescan: " << e.what() << "\n";
    return kExitError;
  }
  protolab::ScenarioResult result;
  try {
    result = protolab::run_scenario(spec);
  } catch (const std::invalid_argument& e) {
    std::cerr << "coffeescan: " << e.what() << "\n";
    return kExitError;
  }
  std::cout << result.transcript.to_jsonl();
  std::cerr << spec.scenario << ": " << result.outcome;
  if (spec.expect) std::cerr << " (expected " << *spec.expect << ")";
  std::cerr << "\n";
  if (spec.expect && *spec.expect != result.outcome) return kExitFindings;
  return kExitClean;
}

int cmd_report(const std::vector<std::string>& files, const std::string& format) {
  std::vector<scan::Summary> parts;
  for (const auto& f : files) {
    try {
      parts.push_back(scan::summarize_document(read_json_file(f)));
    } catch (const std::exception& e) {
      std::cerr << "coffeescan: " << f << ": " << e.what() << "\n";
      return kExitError;
    }
  }
  const scan::Summary total = scan::merge(parts);
  if (format == "text") {
    std::cout << scan::render_summary_text(total);
  } else {
    std::cout << json{{"version", scan::kReportVersion}, {"summary", scan::to_json(total)}}.dump(2) << "\n";
  }
  return kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coffeescan: mini-program key-misuse scanner and protocol lab"};
  app.require_subcommand(1);

  ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan", "Scan packages or corpora");
  scan->add_option("paths", scan_args.paths, ".mapkg files, package directories or corpus directories")->required();
  scan->add_option("--format", scan_args.format)->check(CLI::IsMember({"json", "text"}));
  scan->add_option("--detectors", scan_args.detectors, "comma-separated detector names");
  scan->add_flag("--validate", scan_args.validate, "confirm secret candidates online");
  scan->add_option("--endpoint", scan_args.endpoint, "validation endpoint URL");
  scan->add_option("--jobs", scan_args.jobs, "worker threads (0 = all cores, 1 = serial)")->check(CLI::NonNegativeNumber);
  scan->add_flag("--baidu", scan_args.baidu, "Baidu secret pattern and token path");
  scan->add_option("--config", scan_args.config, "detector config JSON")->check(CLI::ExistingFile);
  scan->add_option("-o,--output", scan_args.output, "write the report here instead of stdout");
  scan->add_option("--rate", scan_args.rate, "validation requests per minute (0 = unlimited)");
  scan->add_option("--concurrency", scan_args.concurrency, "concurrent validation requests");

  ForgeArgs forge_args;
  auto* forge = app.add_subcommand("forge", "Generate a planted corpus and its manifest");
  forge->add_option("--out", forge_args.out);
  forge->add_option("--seed", forge_args.seed);
  forge->add_option("--plants", forge_args.plants, "e.g. BleMisconfig:3,SessionKeyUrl:2@detached");
  forge->add_option("--clean", forge_args.clean);
  forge->add_option("--vulnerable", forge_args.vulnerable, "random-plant packages when --plants is absent");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the mock platform server");
  serve->add_option("--addr", serve_args.addr, "host:port (port 0 picks one)");
  serve->add_option("--seed", serve_args.seed, "registrations JSON")->check(CLI::ExistingFile);
  serve->add_option("--rng-seed", serve_args.rng_seed);
  serve->add_option("--quota", serve_args.quota, "token requests per minute before 45011");

  std::string scenario_file;
  auto* lab = app.add_subcommand("lab", "Run a protocol scenario");
  lab->add_option("--scenario,scenario", scenario_file, "scenario JSON")->required();

  std::vector<std::string> report_files;
  std::string report_format = "text";
  auto* report = app.add_subcommand("report", "Aggregate scan reports");
  report->add_option("files", report_files, "report JSON files");
  report->add_option("--format", report_format)->check(CLI::IsMember({"json", "text"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitClean : kExitError;
  }

  try {
    if (*scan) return cmd_scan(scan_args);
    if (*forge) return cmd_forge(forge_args);
    if (*serve) return cmd_serve(serve_args);
    if (*lab) return cmd_lab(scenario_file);
    if (*report) return cmd_report(report_files, report_format);
  } catch (const std::exception& e) {
    std::cerr << "coffeescan: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
