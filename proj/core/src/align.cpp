#include "accel2grf/align.hpp"

#include "accel2grf/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace accel2grf::align {

RotationMatrix3 RotationMatrix3::axis_angle(Vec3 axis, double angle_rad) {
  const double n = axis.norm();
  const double x = axis.x / n, y = axis.y / n, z = axis.z / n;
  const double c = std::cos(angle_rad), s = std::sin(angle_rad), t = 1.0 - c;
  RotationMatrix3 r;
  r.m = {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
          {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
          {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
  return r;
}

RotationMatrix3 RotationMatrix3::transposed() const {
  RotationMatrix3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
  return r;
}

double RotationMatrix3::determinant() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double RotationMatrix3::orthonormality_error() const {
  double err = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += m[k][i] * m[k][j];
      err = std::max(err, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  }
  return err;
}

RotationMatrix3 operator*(const RotationMatrix3& a, const RotationMatrix3& b) {
  RotationMatrix3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a.m[i][k] * b.m[k][j];
      r.m[i][j] = s;
    }
  }
  return r;
}

std::string_view to_string(AlignmentMode mode) { return mode == AlignmentMode::Norm ? "norm" : "pca"; }

std::optional<AlignmentMode> parse_alignment(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "norm" || key == "accnorm") return AlignmentMode::Norm;
  if (key == "pca" || key == "accpca") return AlignmentMode::Pca;
  return std::nullopt;
}

SensorTrack euclidean_norm_align(const SensorTrack& track) {
  if (track.kind == TrackKind::Magnitude) return track;
  SensorTrack out = track;
  out.kind = TrackKind::Magnitude;
  for (auto& v : out.samples) {
    const double m = v.norm();
    v = {m, m, m};
  }
  return out;
}

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

}  // namespace

RotationMatrix3 pca_rotation_matrix(const SensorTrack& track) {
  const std::size_t n = track.size();
  if (n < 3) throw Error(ErrorCode::DegenerateVariance, "PCA needs at least 3 frames");

  Eigen::MatrixX3d data(static_cast<Eigen::Index>(n), 3);
  Vec3 mean;
  for (const auto& v : track.samples) mean = mean + v;
  mean = (1.0 / static_cast<double>(n)) * mean;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 c = track.samples[i] - mean;
    data.row(static_cast<Eigen::Index>(i)) << c.x, c.y, c.z;
  }
  const double total_variance = data.squaredNorm() / static_cast<double>(n);
  if (!(total_variance >= 1e-12)) {
    throw Error(ErrorCode::DegenerateVariance, std::string(to_string(track.location)) +
                                                   ": total variance below 1e-12");
  }

  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(data, Eigen::ComputeThinV);
  const Eigen::Matrix3d& v = svd.matrixV();
  Vec3 pc1{v(0, 0), v(1, 0), v(2, 0)};
  Vec3 pc2{v(0, 1), v(1, 1), v(2, 1)};
  Vec3 pc3{v(0, 2), v(1, 2), v(2, 2)};

  // Forward travel: net velocity change along the anterior axis >= 0.
  double velocity_change = 0.0;
  for (const auto& a : track.samples) velocity_change += dot(pc1, a);
  if (velocity_change < 0.0) pc1 = -1.0 * pc1;

  // Gravity reads upward on the vertical axis. When the mean is too small to
  // decide, keep the SVD sign and repair handedness on the last axis.
  const double vertical_mean = dot(pc3, mean);
  const double scale = std::sqrt(total_variance) + mean.norm();
  RotationMatrix3 r;
  if (std::abs(vertical_mean) > 1e-9 * scale) {
    if (vertical_mean < 0.0) pc3 = -1.0 * pc3;
    pc2 = cross(pc1, pc3);
  } else {
    const double handed = dot(pc2, cross(pc1, pc3));
    if (handed < 0.0) pc3 = -1.0 * pc3;
  }
  r.m = {{{pc2.x, pc2.y, pc2.z}, {pc1.x, pc1.y, pc1.z}, {pc3.x, pc3.y, pc3.z}}};
  return r;
}

SensorTrack rotate(const SensorTrack& track, const RotationMatrix3& r) {
  SensorTrack out = track;
  for (auto& v : out.samples) v = r.apply(v);
  return out;
}

AlignResult align_trial(const TrialRecord& trial, AlignmentMode mode) {
  AlignResult result;
  result.trial = trial;
  for (const auto& s : trial.sensors) {
    if (s.kind == TrackKind::Position) {
      throw Error(ErrorCode::InvalidArgument, trial.trial_id + ": alignment needs acceleration tracks");
    }
  }

  if (mode == AlignmentMode::Norm) {
    for (auto& s : result.trial.sensors) s = euclidean_norm_align(s);
    return result;
  }

  auto solve = [&](const SensorTrack& track) {
    SensorRotation sr;
    sr.location = track.location;
    try {
      sr.rotation = pca_rotation_matrix(track);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateVariance) throw;
      sr.rotation = RotationMatrix3::identity();
      sr.fallback = true;
      result.warnings.push_back(trial.trial_id + ": " + e.what() + "; using identity");
    }
    return sr;
  };

  if (trial.source_kind == SourceKind::Markers) {
    const SensorTrack* pelvis = trial.find(SensorLocation::Pelvis);
    if (!pelvis) throw Error(ErrorCode::MissingSensor, trial.trial_id + ": pelvis track required for PCA");
    const SensorRotation shared = solve(*pelvis);
    for (auto& s : result.trial.sensors) {
      if (s.kind == TrackKind::Magnitude) continue;
      s = rotate(s, shared.rotation);
      SensorRotation sr = shared;
      sr.location = s.location;
      result.rotations.push_back(sr);
    }
  } else {
    for (auto& s : result.trial.sensors) {
      if (s.kind == TrackKind::Magnitude) continue;
      const SensorRotation sr = solve(s);
      s = rotate(s, sr.rotation);
      result.rotations.push_back(sr);
    }
  }
  return result;
}

}  // namespace accel2grf::align
