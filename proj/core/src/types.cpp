#include "accel2grf/error.hpp"
#include "accel2grf/types.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <utility>

namespace accel2grf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::UnknownSensorName: return "UnknownSensorName";
    case ErrorCode::UpsampleRequested: return "UpsampleRequested";
    case ErrorCode::TrackTooShort: return "TrackTooShort";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::NoContact: return "NoContact";
    case ErrorCode::MissingSensor: return "MissingSensor";
    case ErrorCode::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorCode::NotLeftStance: return "NotLeftStance";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::KMismatch: return "KMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::ZeroRange: return "ZeroRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(SensorLocation loc) {
  switch (loc) {
    case SensorLocation::Pelvis: return "Pelvis";
    case SensorLocation::LThigh: return "LThigh";
    case SensorLocation::RThigh: return "RThigh";
    case SensorLocation::LShank: return "LShank";
    case SensorLocation::RShank: return "RShank";
  }
  return "Pelvis";
}

std::optional<SensorLocation> parse_sensor_location(std::string_view name) {
  static const std::pair<const char*, SensorLocation> kAliases[] = {
      {"pelvis", SensorLocation::Pelvis}, {"pelv", SensorLocation::Pelvis},
      {"sacr", SensorLocation::Pelvis},   {"lthigh", SensorLocation::LThigh},
      {"l_th", SensorLocation::LThigh},   {"lth2", SensorLocation::LThigh},
      {"rthigh", SensorLocation::RThigh}, {"r_th", SensorLocation::RThigh},
      {"rth2", SensorLocation::RThigh},   {"lshank", SensorLocation::LShank},
      {"l_sh", SensorLocation::LShank},   {"ltb2", SensorLocation::LShank},
      {"rshank", SensorLocation::RShank}, {"r_sh", SensorLocation::RShank},
      {"rtb2", SensorLocation::RShank},
  };
  const std::string key = lower(name);
  for (const auto& [alias, loc] : kAliases) {
    if (key == alias) return loc;
  }
  return std::nullopt;
}

std::size_t column_index(SensorLocation loc) { return static_cast<std::size_t>(loc); }

SensorLocation mirrored(SensorLocation loc) {
  switch (loc) {
    case SensorLocation::LThigh: return SensorLocation::RThigh;
    case SensorLocation::RThigh: return SensorLocation::LThigh;
    case SensorLocation::LShank: return SensorLocation::RShank;
    case SensorLocation::RShank: return SensorLocation::LShank;
    case SensorLocation::Pelvis: return SensorLocation::Pelvis;
  }
  return loc;
}

std::string_view to_string(TrackKind kind) {
  switch (kind) {
    case TrackKind::Position: return "position";
    case TrackKind::Acceleration: return "acceleration";
    case TrackKind::Magnitude: return "magnitude";
  }
  return "acceleration";
}

std::optional<TrackKind> parse_track_kind(std::string_view name) {
  const std::string key = lower(name);
  if (key == "position" || key == "marker") return TrackKind::Position;
  if (key == "acceleration" || key == "accelerometer") return TrackKind::Acceleration;
  if (key == "magnitude") return TrackKind::Magnitude;
  return std::nullopt;
}

std::string_view to_string(SourceKind kind) {
  return kind == SourceKind::Markers ? "markers" : "accelerometers";
}

std::optional<SourceKind> parse_source_kind(std::string_view name) {
  const std::string key = lower(name);
  if (key == "markers") return SourceKind::Markers;
  if (key == "accelerometers") return SourceKind::Accelerometers;
  return std::nullopt;
}

std::string_view to_string(Limb limb) { return limb == Limb::Left ? "L" : "R"; }

std::optional<Limb> parse_limb(std::string_view name) {
  const std::string key = lower(name);
  if (key == "l" || key == "left") return Limb::Left;
  if (key == "r" || key == "right") return Limb::Right;
  return std::nullopt;
}

std::string_view to_string(MovementClass cls) {
  switch (cls) {
    case MovementClass::RunSlow: return "run_slow";
    case MovementClass::RunModerate: return "run_moderate";
    case MovementClass::RunFast: return "run_fast";
    case MovementClass::RunAccel: return "run_accel";
    case MovementClass::RunDecel: return "run_decel";
    case MovementClass::Sidestep: return "sidestep";
    case MovementClass::Other: return "other";
  }
  return "other";
}

std::optional<MovementClass> parse_movement(std::string_view name) {
  const std::string key = lower(name);
  for (auto cls : {MovementClass::RunSlow, MovementClass::RunModerate, MovementClass::RunFast,
                   MovementClass::RunAccel, MovementClass::RunDecel, MovementClass::Sidestep,
                   MovementClass::Other}) {
    if (key == to_string(cls)) return cls;
  }
  return std::nullopt;
}

bool is_run(MovementClass cls) {
  return cls == MovementClass::RunSlow || cls == MovementClass::RunModerate ||
         cls == MovementClass::RunFast || cls == MovementClass::RunAccel ||
         cls == MovementClass::RunDecel;
}

const SensorTrack* TrialRecord::find(SensorLocation loc) const {
  for (const auto& s : sensors) {
    if (s.location == loc) return &s;
  }
  return nullptr;
}

SensorTrack* TrialRecord::find(SensorLocation loc) {
  for (auto& s : sensors) {
    if (s.location == loc) return &s;
  }
  return nullptr;
}

}  // namespace accel2grf
