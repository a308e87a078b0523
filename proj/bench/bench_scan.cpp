#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "coffeescan/forge.hpp"
#include "coffeescan/scan.hpp"

using namespace coffeescan;
namespace fs = std::filesystem;

namespace {

// One forged corpus shared by every run; removed at exit.
struct Corpus {
  fs::path dir = fs::temp_directory_path() / ("coffeescan-bench-" + std::to_string(getpid()));
  std::vector<scan::Input> inputs;

  Corpus() {
    forge::ForgeOptions opt;
    opt.seed = 99;
    forge::write_corpus(forge::generate(opt), dir);
    inputs = scan::expand_inputs({dir});
  }
  ~Corpus() { fs::remove_all(dir); }
};

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

void BM_ScanSerial(benchmark::State& state) {
  const auto& inputs = corpus().inputs;
  for (auto _ : state) {
    auto reports = scan::scan_corpus_serial(inputs, {});
    benchmark::DoNotOptimize(reports);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(inputs.size()));
}

void BM_ScanParallel(benchmark::State& state) {
  const auto& inputs = corpus().inputs;
  for (auto _ : state) {
    auto reports = scan::scan_corpus_parallel(inputs, {}, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(reports);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(inputs.size()));
}

}  // namespace

BENCHMARK(BM_ScanSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScanParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
