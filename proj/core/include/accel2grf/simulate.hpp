#pragma once

#include "accel2grf/align.hpp"
#include "accel2grf/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace accel2grf::simulate {

namespace fs = std::filesystem;

struct VirtualImuConfig {
  double output_hz = 250.0;
  bool include_gravity = true;
  std::optional<double> lowpass_cutoff_hz;  // zero-lag Butterworth on positions
};

/// Virtual IMU: second central difference of a position track,
/// a_i = (p[i+1] - 2 p[i] + p[i-1]) / h^2, with second-order one-sided
/// stencils at the ends. Gravity adds +9.81 to z. Output is resampled to
/// cfg.output_hz.
SensorTrack double_differentiate(const SensorTrack& positions, const VirtualImuConfig& cfg = {});

/// Applies double_differentiate to every position track of a marker trial.
TrialRecord markers_to_accelerations(const TrialRecord& trial, const VirtualImuConfig& cfg = {});

enum class LimbPolicy { Right, Left, Alternate };
enum class MountPolicy { None, Random, Explicit };

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t n_trials = 1;
  MovementClass movement = MovementClass::RunSlow;
  double speed_mps = 2.5;
  double stance_ms = 250.0;
  double noise_std_mps2 = 0.0;
  SourceKind source_kind = SourceKind::Markers;
  LimbPolicy limb = LimbPolicy::Alternate;
  MountPolicy mount = MountPolicy::None;
  std::vector<align::RotationMatrix3> mount_rotations;  // one per kSensorOrder entry when Explicit
  double marker_hz = 250.0;
  double accel_hz = 1000.0;
  double force_hz = 2000.0;
  std::string id_prefix = "synth";
};

/// Throws InvalidArgument when the spec breaks its invariants.
void validate(const SynthSpec& spec);

/// Right-stance force family in body-weight units (moments in BW * height),
/// evaluated at normalized stance time tau; zero outside (0, 1).
Wrench force_shape(const ForceShapeParams& p, double tau);

/// Deterministic in (spec.seed, index). Marker-kind output carries lab-frame
/// positions; accelerometer-kind output carries accelerations with gravity,
/// the mount rotation of each sensor and Gaussian noise. Both share all
/// kinematic and force parameters, and record the ground truth in `oracle`.
TrialRecord generate_synthetic_trial(const SynthSpec& spec, std::size_t index);

struct CorpusEntry {
  std::string trial_id;
  MovementClass movement = MovementClass::Other;
  Limb stance_limb = Limb::Right;
  double speed_mps = 0.0;
  std::string path;  // relative to the corpus root
  SourceKind source_kind = SourceKind::Markers;
};

struct CorpusManifest {
  std::vector<CorpusEntry> entries;
  fs::path index_path;
};

inline constexpr const char* kCorpusIndexName = "corpus_index.csv";

CorpusManifest generate_corpus(const std::vector<SynthSpec>& specs, const fs::path& out_dir);
CorpusManifest read_corpus_index(const fs::path& corpus_dir);

}  // namespace accel2grf::simulate
