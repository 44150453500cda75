#pragma once

#include "accel2grf/simulate.hpp"

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("accel2grf_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline accel2grf::simulate::SynthSpec run_spec(std::uint64_t seed = 7) {
  accel2grf::simulate::SynthSpec s;
  s.seed = seed;
  s.movement = accel2grf::MovementClass::RunSlow;
  s.speed_mps = 2.5;
  s.stance_ms = 250.0;
  return s;
}

inline accel2grf::simulate::SynthSpec accel_spec(std::uint64_t seed = 7) {
  auto s = run_spec(seed);
  s.source_kind = accel2grf::SourceKind::Accelerometers;
  return s;
}

}  // namespace testing
