#pragma once

#include "accel2grf/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace accel2grf::gait {

struct ContactConfig {
  double threshold_n = 20.0;
  std::size_t min_contact_frames = 10;
};

/// Foot-strike / toe-off indices at the force rate. `to_frame` is the first
/// frame of the sub-threshold run that ends contact.
struct StanceWindow {
  std::size_t fs_frame = 0;
  std::size_t to_frame = 0;
  std::optional<Limb> stance_limb;
  std::size_t normalized_len = 101;
  double rate_hz = 0.0;  // rate the frame indices refer to
  double t0_s = 0.0;     // time of frame 0

  double fs_time() const { return t0_s + static_cast<double>(fs_frame) / rate_hz; }
  double to_time() const { return t0_s + static_cast<double>(to_frame) / rate_hz; }
  double duration_s() const { return static_cast<double>(to_frame - fs_frame) / rate_hz; }
};

StanceWindow detect_stance_events(const ForceTrack& force, const ContactConfig& cfg = {});

struct LimbDecision {
  Limb limb = Limb::Right;
  bool tie = false;
  double left_energy = 0.0;
  double right_energy = 0.0;
};

/// Stance limb = shank with the larger sum of squared acceleration magnitudes
/// over the stance window. Ties resolve to Right with `tie` set.
LimbDecision detect_stance_limb(const TrialRecord& trial, const StanceWindow& window);

enum class SpeedTrend { Steady, Accel, Decel };
std::string_view to_string(SpeedTrend trend);

struct MovementConfig {
  double running_threshold_mps = 2.16;
  double sidestep_angle_deg = 30.0;
  double trend_threshold_mps_per_stance = 0.5;
  bool strict_bins = false;
};

struct MovementLabel {
  MovementClass cls = MovementClass::Other;
  SpeedTrend trend = SpeedTrend::Steady;
  double mean_speed_mps = 0.0;
  double heading_change_deg = 0.0;  // positive = leftward turn
  bool crossover = false;
  bool from_manifest = false;
};

/// Speed-bin assignment for a running speed (no threshold check).
MovementClass speed_bin(double speed_mps, bool strict_bins);

/// Marker trials are classified from the pelvis position track alone;
/// accelerometer trials take the manifest label.
MovementLabel classify_movement(const TrialRecord& trial,
                                const std::optional<StanceWindow>& window,
                                const MovementConfig& cfg = {});

/// Fractional sample position of a window edge inside a track.
double track_position(double time_s, double track_t0_s, double track_rate_hz);

/// Linear resample of `values` between fractional positions [start, end]
/// onto `n_points` equally spaced points. Endpoints are the exact edge values.
std::vector<double> normalize_span(std::span<const double> values, double start, double end,
                                   std::size_t n_points);

std::vector<Vec3> normalize_stance(const SensorTrack& track, const StanceWindow& window,
                                   std::size_t n_points = 101);
std::vector<Wrench> normalize_stance(const ForceTrack& force, const StanceWindow& window,
                                     std::size_t n_points = 101);

/// Force-rate frame where the retained span starts: floor(FS - f*(TO-FS)), clamped at 0.
std::size_t lead_in_start(const StanceWindow& window, double lead_fraction);
ForceTrack trim_lead_in(const ForceTrack& force, const StanceWindow& window,
                        double lead_fraction = 0.25);
SensorTrack trim_lead_in(const SensorTrack& track, const StanceWindow& window,
                         double lead_fraction = 0.25);

/// Reflection across the sagittal plane: L/R limb sensors swap, lateral
/// components negate, (Fx,Fy,Fz,Mx,My,Mz) -> (-Fx,Fy,Fz,Mx,-My,-Mz).
/// Accepts Left stance, or an already mirrored Right trial (which it restores).
TrialRecord mirror_left_to_right(const TrialRecord& trial);

Wrench mirror_wrench(const Wrench& w);

}  // namespace accel2grf::gait
