// Acceptance suite: executes the ten experiment manifests in order inside a
// shared working directory and prints one pass/fail line per criterion.
// Criteria 9 and 10 reuse the artifacts of criterion 5, which is why order
// matters here (standalone manifest runs must execute c05 first).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ssnf/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const char* kManifests[] = {
    "c01_autodiff.json",        "c02_compositing.json",   "c03_loss_closed_forms.json",
    "c04_rpc_round_trip.json",  "c05_semantic_accuracy.json", "c06_transient_ablation.json",
    "c07_label_fusion.json",    "c08_corruption_contract.json", "c09_schedule.json",
    "c10_determinism.json",
};

}  // namespace

int main(int argc, char** argv) {
  std::string work = (fs::current_path() / "acceptance_work").string();
  int only = 0;
  bool verbose = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--work") == 0 && i + 1 < argc) work = argv[++i];
    else if (std::strcmp(argv[i], "--verbose") == 0) verbose = true;
    else {
      std::printf("usage: acceptance [--criterion N] [--work DIR] [--verbose]\n");
      return 2;
    }
  }

  const std::string cli = SSNF_CLI_PATH;
  const std::string manifest_dir = SSNF_MANIFEST_DIR;
  fs::create_directories(work);

  int failures = 0;
  for (int i = 0; i < 10; ++i) {
    if (only > 0 && only != i + 1) continue;
    const std::string path = (fs::path(manifest_dir) / kManifests[i]).string();
    ssnf::ExperimentManifest m = ssnf::ExperimentManifest::load(path);
    const auto t0 = std::chrono::steady_clock::now();
    ssnf::ManifestResult res = ssnf::run_manifest(m, cli, work);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %-24s (%.1f s)\n", res.passed ? "PASS" : "FAIL", i + 1,
                m.name.c_str(), secs);
    if (verbose || !res.passed)
      for (const auto& line : res.log) std::printf("        %s\n", line.c_str());
    std::fflush(stdout);
    if (!res.passed) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
