#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ecglens/common.hpp"
#include "ecglens/ingest.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ecglens_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes <base>.hea and <base>.dat in WFDB format 16 with the given
/// per-lead gain and baseline; raw = round(value * gain) + baseline.
inline void write_wfdb(const std::filesystem::path& base, const ecglens::EcgSignal& signal, double gain = 1000.0,
                       int baseline = 0, std::size_t samples = ecglens::kSamples, std::size_t leads = ecglens::kLeads) {
  std::filesystem::create_directories(base.parent_path());
  const std::string name = base.filename().string();
  std::ofstream hea(base.string() + ".hea");
  hea << name << ' ' << leads << " 100 " << samples << '\n';
  const auto& lead_names = ecglens::standard_lead_names();
  for (std::size_t l = 0; l < leads; ++l) {
    hea << name << ".dat 16 " << gain << "(" << baseline << ")/mV 16 0 0 0 0 " << lead_names[l % 12] << '\n';
  }
  std::ofstream dat(base.string() + ".dat", std::ios::binary);
  for (std::size_t t = 0; t < samples; ++t) {
    for (std::size_t l = 0; l < leads; ++l) {
      const double v = t < ecglens::kSamples && l < ecglens::kLeads ? signal.at(t, l) : 0.0;
      const auto raw = static_cast<std::int16_t>(std::lround(v * gain) + baseline);
      dat.put(static_cast<char>(raw & 0xff));
      dat.put(static_cast<char>((raw >> 8) & 0xff));
    }
  }
}

inline ecglens::EcgSignal random_signal(std::uint64_t seed, double scale = 1.0) {
  ecglens::Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  ecglens::EcgSignal s;
  for (auto& v : s.samples) v = n(rng);
  return s;
}

/// Signal quantized to the 1/1000 mV grid so a WFDB roundtrip is exact.
inline ecglens::EcgSignal quantized_signal(std::uint64_t seed) {
  auto s = random_signal(seed);
  for (auto& v : s.samples) v = std::round(v * 1000.0) / 1000.0;
  return s;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  ecglens::Rng rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace fixtures
