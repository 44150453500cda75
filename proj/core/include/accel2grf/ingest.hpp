#pragma once

#include "accel2grf/gait.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace accel2grf::ingest {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "trial.json";

/// Reads `trial.json` plus the per-track CSVs it names. Units are converted to
/// SI and columns are reordered to (lateral, anterior, vertical). Empty sensor
/// fields are kept as NaN gaps for the quality gate; literal non-finite text is
/// rejected. Throws Error naming the offending file and line.
TrialRecord parse_trial(const fs::path& dir);

/// Writes the directory format read by parse_trial. Values are emitted with
/// shortest round-trip formatting, so parse_trial(write_trial(t)) == t.
void write_trial(const TrialRecord& trial, const fs::path& dir);

/// Linear interpolation onto a uniform grid at `target_hz` covering the
/// original time extent. The first sample is preserved exactly.
SensorTrack resample_uniform(const SensorTrack& track, double target_hz);

enum class RejectReason { GapTooLong, NoContact, DurationTooShort };
std::string_view to_string(RejectReason reason);

struct GateResult {
  std::optional<TrialRecord> accepted;
  std::optional<RejectReason> reason;
  std::size_t filled_frames = 0;
  std::string detail;

  bool ok() const { return accepted.has_value(); }
};

struct GateConfig {
  std::size_t max_gap_frames = 10;
  gait::ContactConfig contact;
};

GateResult quality_gate(const TrialRecord& trial, const GateConfig& cfg = {});

/// SHA-256 of a byte-stable encoding of all sensor and force samples.
std::string content_hash(const TrialRecord& trial);

/// Drops trials whose content hash matches an earlier one; order is preserved.
std::vector<TrialRecord> dedupe(std::vector<TrialRecord> trials);

}  // namespace accel2grf::ingest
