#include "ssnf/manifest.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ssnf {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentManifest ExperimentManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j = json::parse(in);
  ExperimentManifest m;
  m.name = j.at("name").get<std::string>();
  if (j.contains("reference")) m.reference = j["reference"].get<std::string>();
  for (const auto& s : j.value("stages", json::array())) {
    ManifestStage stage;
    stage.args = s.at("run").get<std::vector<std::string>>();
    m.stages.push_back(stage);
  }
  for (const auto& e : j.value("expect", json::array())) {
    ManifestExpectation ex;
    ex.file = e.at("file").get<std::string>();
    ex.key = e.at("key").get<std::string>();
    ex.op = e.at("op").get<std::string>();
    ex.value = e.value("value", 0.0);
    ex.tol = e.value("tol", 0.0);
    ex.file_b = e.value("file_b", std::string());
    ex.key_b = e.value("key_b", std::string());
    if (ex.op != "ge" && ex.op != "le" && ex.op != "within")
      throw std::runtime_error("manifest expectation op must be ge|le|within");
    m.expect.push_back(ex);
  }
  for (const auto& c : j.value("compare_files", json::array()))
    m.compare_files.push_back({c.at(0).get<std::string>(), c.at(1).get<std::string>()});
  return m;
}

double read_report_value(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    if (token.substr(0, eq) == key) return std::strtod(token.c_str() + eq + 1, nullptr);
  }
  throw std::runtime_error("key '" + key + "' not found in " + path);
}

namespace {

std::string expand(const std::string& s, const std::string& work, const std::string& bin) {
  std::string out = s;
  for (const auto& [from, to] :
       std::vector<std::pair<std::string, std::string>>{{"{work}", work}, {"{bin}", bin}}) {
    size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return out;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s)
    if (c == '\'')
      out += "'\\''";
    else
      out.push_back(c);
  out.push_back('\'');
  return out;
}

bool files_equal(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

}  // namespace

ManifestResult run_manifest(const ExperimentManifest& m, const std::string& cli_path,
                            const std::string& work_dir) {
  ManifestResult result;
  result.name = m.name;
  fs::create_directories(work_dir);

  for (size_t i = 0; i < m.stages.size(); ++i) {
    std::string cmd = shell_quote(cli_path);
    for (const auto& arg : m.stages[i].args) cmd += " " + shell_quote(expand(arg, work_dir, cli_path));
    const int rc = std::system(cmd.c_str());
    result.log.push_back("stage " + std::to_string(i) + ": " + cmd +
                         (rc == 0 ? " [ok]" : " [exit " + std::to_string(rc) + "]"));
    if (rc != 0) {
      result.passed = false;
      return result;
    }
  }

  bool all_ok = true;
  for (const auto& ex : m.expect) {
    const std::string file = expand(ex.file, work_dir, cli_path);
    bool ok = false;
    std::string note;
    try {
      const double got = read_report_value(file, ex.key);
      double rhs = ex.value;
      if (!ex.file_b.empty()) {
        const std::string key_b = ex.key_b.empty() ? ex.key : ex.key_b;
        rhs = read_report_value(expand(ex.file_b, work_dir, cli_path), key_b) + ex.value;
      }
      if (ex.op == "ge") ok = got >= rhs;
      else if (ex.op == "le") ok = got <= rhs;
      else ok = std::abs(got - rhs) <= ex.tol;
      char buf[256];
      std::snprintf(buf, sizeof(buf), "expect %s %s %g%s: got %g [%s]", ex.key.c_str(),
                    ex.op.c_str(), rhs,
                    ex.op == "within" ? (" +-" + std::to_string(ex.tol)).c_str() : "", got,
                    ok ? "ok" : "FAIL");
      note = buf;
    } catch (const std::exception& e) {
      note = std::string("expect ") + ex.key + ": error " + e.what();
    }
    result.log.push_back(note);
    all_ok = all_ok && ok;
  }
  for (const auto& c : m.compare_files) {
    const std::string a = expand(c.a, work_dir, cli_path), b = expand(c.b, work_dir, cli_path);
    const bool ok = files_equal(a, b);
    result.log.push_back("compare " + a + " == " + b + (ok ? " [ok]" : " [FAIL]"));
    all_ok = all_ok && ok;
  }
  result.passed = all_ok;
  return result;
}

}  // namespace ssnf
