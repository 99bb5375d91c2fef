#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "langsel/cli.hpp"
#include "langsel/typology.hpp"

namespace langsel::testing {

inline const std::string kDataDir = LANGSEL_DATA_DIR;
inline const std::string kMetadata65 = kDataDir + "/l65_metadata.tsv";

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("langsel_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t d, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(d);
  for (;;) {
    double sq = 0.0;
    for (auto& x : v) {
      x = u(rng);
      sq += x * x;
    }
    if (sq > 1e-6) return v;
  }
}

inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> g;
  std::vector<double> v(d);
  double sq = 0.0;
  for (auto& x : v) {
    x = g(rng);
    sq += x * x;
  }
  const double n = std::sqrt(sq);
  for (auto& x : v) x /= n;
  return v;
}

inline std::string metadata_text(const std::vector<LanguageRecord>& recs) {
  std::string s(kMetadataHeader);
  s += '\n';
  for (const auto& r : recs) {
    s += r.code + '\t' + r.name + '\t' + r.script + '\t' + r.family + '\t' + std::to_string(r.joshi_class) + '\t' +
         (r.seen_xlmr ? "1" : "0") + '\t' + (r.seen_mbert ? "1" : "0") + '\n';
  }
  return s;
}

inline std::string vectors_text(const std::vector<LanguageRecord>& recs) {
  std::ostringstream s;
  s.precision(17);
  s << "code\n";
  for (const auto& r : recs) {
    s << r.code;
    for (double x : r.vector) s << '\t' << x;
    s << '\n';
  }
  return s.str();
}

// Deterministic pseudo-feature vectors for the shipped 66-row metadata file.
inline std::string synthetic_vectors_for(const std::string& metadata_path, std::size_t d, std::uint64_t seed) {
  const Catalog meta = load_metadata(metadata_path);
  std::mt19937_64 rng(seed);
  std::ostringstream s;
  s.precision(17);
  s << "code";
  for (std::size_t i = 0; i < d; ++i) s << "\tf" << i;
  s << '\n';
  for (const auto& r : meta.records()) {
    s << r.code;
    for (double x : random_vector(rng, d, 0.0, 1.0)) s << '\t' << x;
    s << '\n';
  }
  return s.str();
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "langsel");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace langsel::testing
