#pragma once

#include <string>
#include <vector>

namespace ssnf {

// A reproducible experiment as data: CLI stages plus expectations over the
// key=value report files the stages write. "{work}" in any argument expands
// to the working directory, "{bin}" to the CLI executable.
struct ManifestStage {
  std::vector<std::string> args;
};

struct ManifestExpectation {
  std::string file;  // report file holding key=value lines
  std::string key;
  std::string op;  // ge | le | within
  double value = 0;
  double tol = 0;  // for "within"
  // when set, the comparison baseline is file_b:key_b (same key by default)
  // shifted by `value`: ge means lhs >= rhs + value, within means
  // |lhs - (rhs + value)| <= tol
  std::string file_b, key_b;
};

struct FileComparison {
  std::string a, b;  // expected byte-identical
};

struct ExperimentManifest {
  std::string name;
  std::string reference;  // free-form note on what the experiment mirrors
  std::vector<ManifestStage> stages;
  std::vector<ManifestExpectation> expect;
  std::vector<FileComparison> compare_files;

  static ExperimentManifest load(const std::string& path);
};

struct ManifestResult {
  std::string name;
  bool passed = false;
  std::vector<std::string> log;  // one line per stage / expectation
};

// Executes the stages through the CLI binary, then checks every
// expectation. A failing stage aborts with its log captured.
ManifestResult run_manifest(const ExperimentManifest& m, const std::string& cli_path,
                            const std::string& work_dir);

// parses "key=value" (whitespace-separated pairs allowed) report files
double read_report_value(const std::string& path, const std::string& key);

}  // namespace ssnf
