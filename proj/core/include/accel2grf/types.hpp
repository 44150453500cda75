#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace accel2grf {

inline constexpr double kGravity = 9.81;

// Axis convention everywhere: x lateral (positive right), y anterior, z vertical.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

enum class SensorLocation { Pelvis, LThigh, RThigh, LShank, RShank };

/// Fixed column order of the encoded image and of canonical hashing.
inline constexpr std::array<SensorLocation, 5> kSensorOrder = {
    SensorLocation::Pelvis, SensorLocation::LThigh, SensorLocation::RThigh,
    SensorLocation::LShank, SensorLocation::RShank};

std::string_view to_string(SensorLocation loc);
/// Accepts canonical names plus the marker/device aliases (SACR, LTH2, L_Th, ...).
std::optional<SensorLocation> parse_sensor_location(std::string_view name);
std::size_t column_index(SensorLocation loc);
SensorLocation mirrored(SensorLocation loc);

enum class TrackKind { Position, Acceleration, Magnitude };
std::string_view to_string(TrackKind kind);
std::optional<TrackKind> parse_track_kind(std::string_view name);

struct SensorTrack {
  SensorLocation location = SensorLocation::Pelvis;
  TrackKind kind = TrackKind::Acceleration;
  double rate_hz = 0.0;
  double t0_s = 0.0;
  std::vector<Vec3> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const SensorTrack&) const = default;
};

enum ForceChannel : std::size_t { kFx = 0, kFy, kFz, kMx, kMy, kMz };
inline constexpr std::size_t kForceChannels = 6;
inline constexpr std::array<std::string_view, 6> kForceChannelNames = {"Fx", "Fy", "Fz",
                                                                       "Mx", "My", "Mz"};

using Wrench = std::array<double, kForceChannels>;

struct ForceTrack {
  double rate_hz = 0.0;
  double t0_s = 0.0;
  std::vector<Wrench> channels;

  std::size_t size() const { return channels.size(); }
  bool operator==(const ForceTrack&) const = default;
};

enum class Sex { Female, Male, Other };

struct SubjectMeta {
  double mass_kg = 0.0;
  double height_m = 0.0;
  std::optional<Sex> sex;
  bool operator==(const SubjectMeta&) const = default;
};

enum class SourceKind { Markers, Accelerometers };
std::string_view to_string(SourceKind kind);
std::optional<SourceKind> parse_source_kind(std::string_view name);

enum class Limb { Left, Right };
std::string_view to_string(Limb limb);
std::optional<Limb> parse_limb(std::string_view name);

enum class MovementClass { RunSlow, RunModerate, RunFast, RunAccel, RunDecel, Sidestep, Other };
std::string_view to_string(MovementClass cls);
std::optional<MovementClass> parse_movement(std::string_view name);
bool is_run(MovementClass cls);

/// Closed-form parameters the generator used for one trial's force family.
/// Shapes are defined for right stance; left-stance trials are the mirror image.
struct ForceShapeParams {
  double impact = 0.0;      // F_z impact bump amplitude [BW]
  double active = 0.0;      // F_z active bump amplitude [BW]
  double base = 0.0;        // F_z plateau [BW]
  double braking = 0.0;     // F_y braking lobe [BW]
  double propulsion = 0.0;  // F_y propulsion lobe [BW]
  double lateral = 0.0;     // F_x lobe [BW], medial for right stance
  double moment_scale = 0.0;
  bool operator==(const ForceShapeParams&) const = default;
};

/// Ground truth recorded by the synthetic generator.
struct SynthOracle {
  int fs_frame = 0;  // force-rate index of the first contact frame
  int to_frame = 0;  // force-rate index of the first frame after contact
  Limb stance_limb = Limb::Right;
  double speed_mps = 0.0;
  MovementClass movement = MovementClass::Other;
  ForceShapeParams force;
  bool operator==(const SynthOracle&) const = default;
};

struct TrialRecord {
  std::string trial_id;
  SubjectMeta subject;
  std::vector<SensorTrack> sensors;
  std::optional<ForceTrack> force;
  std::optional<MovementClass> movement_label;
  SourceKind source_kind = SourceKind::Accelerometers;
  std::optional<Limb> stance_limb;
  bool mirrored = false;
  std::optional<SynthOracle> oracle;

  const SensorTrack* find(SensorLocation loc) const;
  SensorTrack* find(SensorLocation loc);
  bool operator==(const TrialRecord&) const = default;
};

}  // namespace accel2grf
