#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/node_fdm.hpp"
#include "nodefdm/performance.hpp"
#include "nodefdm/synthetic.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("nodefdm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline nodefdm::synth::FlightScript quiet_script(std::uint64_t seed) {
  auto s = nodefdm::synth::random_script(seed);
  s.noise_enabled = false;
  return s;
}

inline nodefdm::data::FlightSeries flight(std::uint64_t seed, bool noise = true) {
  auto s = nodefdm::synth::random_script(seed);
  s.noise_enabled = noise;
  auto f = nodefdm::synth::generate_flight(nodefdm::perf::PerformanceConfig{}, s).series;
  f.tag = "flight" + std::to_string(seed);
  return f;
}

/// Randomly initialized model normalized on a few generated flights.
inline const std::vector<nodefdm::data::FlightSeries>& sample_flights() {
  static const std::vector<nodefdm::data::FlightSeries> flights = {flight(101), flight(102), flight(103)};
  return flights;
}

/// Randomly initialized model normalized on sample_flights().
inline nodefdm::model::NodeFdmModel random_model(std::uint64_t seed) {
  return nodefdm::model::make_model(nodefdm::data::compute_norm_stats(sample_flights()), seed);
}

}  // namespace testing
