#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ssnf/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = SSNF_CLI_PATH;

struct RunOut {
  int code = 0;
  std::string output;
};

RunOut run_cli(const std::string& args) {
  const auto out_file = fs::temp_directory_path() / "ssnf_cli_out.txt";
  const std::string cmd = "'" + kCli + "' " + args + " > '" + out_file.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(rc), ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static fs::path p = [] {
    auto d = fs::temp_directory_path() / "ssnf_tooling";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

}  // namespace

TEST_CASE("cli: help round-trips every subcommand and exits 0") {
  RunOut help = run_cli("--help");
  CHECK(help.code == 0);
  for (const char* sub :
       {"synth", "train", "render", "eval", "corrupt", "fuse", "manifest", "selftest"})
    CHECK(help.output.find(sub) != std::string::npos);
  RunOut synth_help = run_cli("synth --help");
  CHECK(synth_help.code == 0);
  for (const char* flag : {"--preset", "--seed", "--views", "--size", "--out", "--no-vehicles"})
    CHECK(synth_help.output.find(flag) != std::string::npos);
  RunOut train_help = run_cli("train --help");
  for (const char* flag : {"--no-transient-reg", "--semantic-activation", "--iters", "--config"})
    CHECK(train_help.output.find(flag) != std::string::npos);
}

TEST_CASE("cli: usage errors exit 2, runtime errors exit 1") {
  CHECK(run_cli("synth --bogus-flag 1").code == 2);
  CHECK(run_cli("definitely-not-a-command").code == 2);
  CHECK(run_cli("train --data /nonexistent/dataset --out /tmp/ssnf_nope").code == 1);
  CHECK(run_cli("render --ckpt /nonexistent.ssck --data /nonexistent --frame 0").code == 1);
}

TEST_CASE("cli: synth is deterministic and honors size/views") {
  const auto d1 = work_dir() / "synth1";
  const auto d2 = work_dir() / "synth2";
  RunOut r1 = run_cli("synth --preset parking_lot --seed 7 --views 10 --size 48 --out '" +
                      d1.string() + "'");
  CHECK(r1.code == 0);
  RunOut r2 = run_cli("synth --preset parking_lot --seed 7 --views 10 --size 48 --out '" +
                      d2.string() + "'");
  CHECK(r2.code == 0);

  int train_count = 0, test_count = 0;
  {
    std::ifstream meta(d1 / "meta.json");
    std::stringstream ss;
    ss << meta.rdbuf();
    std::string text = ss.str();
    size_t pos = 0;
    while ((pos = text.find("\"train\"", pos)) != std::string::npos) {
      ++train_count;
      pos += 7;
    }
    pos = 0;
    while ((pos = text.find("\"test\"", pos)) != std::string::npos) {
      ++test_count;
      pos += 6;
    }
  }
  CHECK(train_count == 8);
  CHECK(test_count == 2);

  for (const char* rel : {"meta.json", "rgb/frame_0000.png", "labels/frame_0003.png",
                          "rpc/frame_0005.txt", "depth/frame_0009.bin"})
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));
}

TEST_CASE("cli: train, render and eval round-trip on a tiny run") {
  const auto data = work_dir() / "data";
  RunOut s = run_cli("synth --preset town --seed 2 --views 4 --size 16 --split-every 4 --out '" +
                     data.string() + "'");
  REQUIRE(s.code == 0);

  const auto run = work_dir() / "run";
  RunOut t = run_cli("train --data '" + data.string() + "' --out '" + run.string() +
                     "' --preset desk --seed 1 --iters 12 --batch 32 --samples 16 "
                     "--log-interval 3 --checkpoint-interval 6");
  CHECK(t.code == 0);
  CHECK(fs::exists(run / "checkpoint.ssck"));
  CHECK(fs::exists(run / "metrics.log"));
  CHECK(fs::exists(run / "config.json"));

  const auto prefix = (work_dir() / "render" / "view").string();
  fs::create_directories(work_dir() / "render");
  RunOut r = run_cli("render --ckpt '" + (run / "checkpoint.ssck").string() + "' --data '" +
                     data.string() + "' --frame 3 --modality all --out '" + prefix + "'");
  CHECK(r.code == 0);
  for (const char* suffix : {"_rgb.png", "_semantic.png", "_semantic_rgb.png", "_sun.png",
                             "_uncertainty.png", "_depth.png", "_semantic_shaded.png"})
    CHECK(fs::exists(prefix + suffix));

  // deterministic rendering
  const auto prefix2 = (work_dir() / "render" / "view2").string();
  run_cli("render --ckpt '" + (run / "checkpoint.ssck").string() + "' --data '" + data.string() +
          "' --frame 3 --modality semantic --out '" + prefix2 + "'");
  CHECK(slurp(prefix + "_semantic.png") == slurp(prefix2 + "_semantic.png"));

  const auto report = (work_dir() / "eval.txt").string();
  RunOut e = run_cli("eval --ckpt '" + (run / "checkpoint.ssck").string() + "' --data '" +
                     data.string() + "' --split train --metric all --report '" + report + "'");
  CHECK(e.code == 0);
  CHECK(ssnf::read_report_value(report, "accuracy_mean") >= 0.0);
  CHECK_NOTHROW(ssnf::read_report_value(report, "transient_uncertainty"));
  CHECK_NOTHROW(ssnf::read_report_value(report, "psnr_mean"));

  // config flag overrides beat config-file values
  const auto cfg_file = work_dir() / "override.json";
  {
    std::ofstream f(cfg_file);
    f << "{\"iterations\": 99999, \"batch\": 32}";
  }
  const auto run2 = work_dir() / "run2";
  RunOut t2 = run_cli("train --data '" + data.string() + "' --out '" + run2.string() +
                      "' --preset desk --config '" + cfg_file.string() +
                      "' --iters 4 --samples 16 --seed 1");
  CHECK(t2.code == 0);
  std::string cfg_written = slurp(run2 / "config.json");
  CHECK(cfg_written.find("\"iterations\": 4") != std::string::npos);

  // unknown config keys are rejected
  const auto bad_cfg = work_dir() / "bad.json";
  {
    std::ofstream f(bad_cfg);
    f << "{\"learning_rate_typo\": 0.1}";
  }
  RunOut t3 = run_cli("train --data '" + data.string() + "' --out '" + run2.string() +
                      "' --config '" + bad_cfg.string() + "'");
  CHECK(t3.code == 1);
}

TEST_CASE("manifest: empty manifest passes trivially") {
  const auto path = work_dir() / "empty_manifest.json";
  {
    std::ofstream f(path);
    f << R"({"name": "empty", "stages": [], "expect": []})";
  }
  ssnf::ExperimentManifest m = ssnf::ExperimentManifest::load(path.string());
  ssnf::ManifestResult res = ssnf::run_manifest(m, kCli, (work_dir() / "mwork").string());
  CHECK(res.passed);
}

TEST_CASE("manifest: stages run, expectations and file comparisons are checked") {
  const auto path = work_dir() / "synth_manifest.json";
  {
    std::ofstream f(path);
    f << R"({
      "name": "synth-determinism",
      "stages": [
        {"run": ["synth", "--preset", "flat", "--seed", "5", "--views", "4", "--size", "16", "--out", "{work}/a"]},
        {"run": ["synth", "--preset", "flat", "--seed", "5", "--views", "4", "--size", "16", "--out", "{work}/b"]},
        {"run": ["selftest", "--criterion", "3", "--report", "{work}/r.txt"]}
      ],
      "expect": [
        {"file": "{work}/r.txt", "key": "passed", "op": "ge", "value": 1}
      ],
      "compare_files": [["{work}/a/meta.json", "{work}/b/meta.json"]]
    })";
  }
  ssnf::ExperimentManifest m = ssnf::ExperimentManifest::load(path.string());
  ssnf::ManifestResult res = ssnf::run_manifest(m, kCli, (work_dir() / "mwork2").string());
  for (const auto& l : res.log) {
    CAPTURE(l);
  }
  CHECK(res.passed);

  // failing expectation flips the result
  ssnf::ExperimentManifest bad = m;
  bad.expect[0].op = "le";
  bad.expect[0].value = 0;
  ssnf::ManifestResult res2 = ssnf::run_manifest(bad, kCli, (work_dir() / "mwork2").string());
  CHECK(!res2.passed);

  // failing stage aborts with a captured log
  ssnf::ExperimentManifest broken = m;
  broken.stages[0].args = {"synth", "--out"};
  ssnf::ManifestResult res3 = ssnf::run_manifest(broken, kCli, (work_dir() / "mwork3").string());
  CHECK(!res3.passed);
  CHECK(!res3.log.empty());
}

TEST_CASE("selftest subcommand reports the fast property suites") {
  for (int crit : {2, 3, 4}) {
    RunOut r = run_cli("selftest --criterion " + std::to_string(crit));
    CAPTURE(crit);
    CHECK(r.code == 0);
    CHECK(r.output.find("passed=1") != std::string::npos);
  }
  CHECK(run_cli("selftest --criterion 42").code == 1);
}

TEST_CASE("read_report_value parses key=value files") {
  const auto path = work_dir() / "report.txt";
  {
    std::ofstream f(path);
    f << "alpha=1.5\nsplit=test beta=-2 gamma=3e-4\n";
  }
  CHECK(ssnf::read_report_value(path.string(), "alpha") == 1.5);
  CHECK(ssnf::read_report_value(path.string(), "beta") == -2.0);
  CHECK(ssnf::read_report_value(path.string(), "gamma") == doctest::Approx(3e-4));
  CHECK_THROWS(ssnf::read_report_value(path.string(), "missing"));
}
