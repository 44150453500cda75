#pragma once

#include "accel2grf/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace accel2grf::align {

/// Proper rotation; rows are the target axes expressed in source coordinates.
struct RotationMatrix3 {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static RotationMatrix3 identity() { return {}; }
  /// Right-handed rotation of `angle_rad` about the unit vector `axis`.
  static RotationMatrix3 axis_angle(Vec3 axis, double angle_rad);

  Vec3 apply(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
  RotationMatrix3 transposed() const;
  double determinant() const;
  /// max |R^T R - I|
  double orthonormality_error() const;

  friend RotationMatrix3 operator*(const RotationMatrix3& a, const RotationMatrix3& b);
  bool operator==(const RotationMatrix3&) const = default;
};

enum class AlignmentMode { Norm, Pca };
std::string_view to_string(AlignmentMode mode);
std::optional<AlignmentMode> parse_alignment(std::string_view name);

/// Replaces every frame by (m, m, m), m = |a|, and marks the track
/// magnitude-kind. Magnitude-kind input is returned unchanged.
SensorTrack euclidean_norm_align(const SensorTrack& track);

/// PCA of the centred frames (SVD): PC1 -> anterior (y), PC2 -> lateral (x),
/// PC3 -> vertical (z). PC1 is signed so the net velocity change along the
/// rotated anterior axis is non-negative; PC3 is signed so the mean rotated
/// vertical reading (gravity) is non-negative. Throws DegenerateVariance when
/// the total variance is below 1e-12.
RotationMatrix3 pca_rotation_matrix(const SensorTrack& track);

SensorTrack rotate(const SensorTrack& track, const RotationMatrix3& r);

struct SensorRotation {
  SensorLocation location = SensorLocation::Pelvis;
  RotationMatrix3 rotation;
  bool fallback = false;  // identity used after DegenerateVariance
};

struct AlignResult {
  TrialRecord trial;
  std::vector<SensorRotation> rotations;  // empty for NORM
  std::vector<std::string> warnings;
};

/// NORM: per-sensor magnitude. PCA on marker-derived trials: one rotation from
/// the pelvis track applied to all sensors. PCA on accelerometer trials: one
/// rotation per sensor.
AlignResult align_trial(const TrialRecord& trial, AlignmentMode mode);

}  // namespace accel2grf::align
