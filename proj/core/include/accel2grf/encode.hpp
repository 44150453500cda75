#pragma once

#include "accel2grf/gait.hpp"
#include "accel2grf/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace accel2grf::encode {

namespace fs = std::filesystem;

/// Interleaved 8-bit RGB, row-major, row 0 at the top.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels[(row * width + col) * 3 + ch];
  }
  bool operator==(const Image&) const = default;
};

/// Real-valued grid: rows = stance frames, columns = sensors in kSensorOrder.
struct RealGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Vec3> values;  // row-major

  Vec3& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const Vec3& at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct ChannelScale {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const ChannelScale&) const = default;
};

/// Byte mapping of the R (x), G (y) and B (z) channels.
struct ScalingRecord {
  std::array<ChannelScale, 3> channels{};
  bool fixed_range = false;
  bool operator==(const ScalingRecord&) const = default;
};

struct EncodeOptions {
  std::size_t size = 227;
  std::size_t n_points = 101;
  std::optional<double> fixed_range_mps2;  // symmetric range instead of per-image min-max
  bool time_upwards = true;                // row 0 holds the last stance frame
  std::optional<double> lead_fraction;     // include lead-in context before FS
};

RealGrid build_acceleration_grid(const TrialRecord& trial, const gait::StanceWindow& window,
                                 const EncodeOptions& opts = {});

struct QuantizedGrid {
  Image grid;  // height = n_points, width = 5
  ScalingRecord scaling;
};

/// v -> round(255 (v - min) / (max - min)) per channel over the whole grid;
/// a constant channel maps to 0.
QuantizedGrid quantize_grid(const RealGrid& grid, const EncodeOptions& opts = {});

/// Inverse byte mapping of a pre-resize grid (a constant channel decodes to its value).
RealGrid decode_image_grid(const Image& grid, const ScalingRecord& scaling);

/// Bilinear resize with corner alignment; outputs are rounded to bytes.
Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);

struct EncodedImage {
  Image image;
  QuantizedGrid pre_resize;
};

EncodedImage encode_image(const TrialRecord& trial, const gait::StanceWindow& window,
                          const EncodeOptions& opts = {});

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// Stance-normalized GRF/M in body-weight units (moments in BW * height),
/// interlaced frame-major: [Fx0, Fy0, Fz0, Mx0, My0, Mz0, Fx1, ...].
std::vector<double> build_target(const ForceTrack& force, const gait::StanceWindow& window,
                                 const SubjectMeta& subject, std::size_t n_points = 101);

std::array<std::vector<double>, kForceChannels> deinterlace(const std::vector<double>& target);
std::vector<double> interlace(const std::array<std::vector<double>, kForceChannels>& channels);

/// Converts normalized channels back to N and N*m.
std::array<std::vector<double>, kForceChannels> denormalize(
    const std::array<std::vector<double>, kForceChannels>& channels, const SubjectMeta& subject);

struct OutputPcaModel {
  std::size_t n_points = 101;
  std::vector<double> mean;                // length dim
  std::vector<double> basis;               // k rows of length dim
  std::vector<double> explained_variance;  // length k, non-increasing
  double variance_keep = 0.995;
  double total_variance = 0.0;

  std::size_t dim() const { return mean.size(); }
  std::size_t k() const { return explained_variance.size(); }
  const double* row(std::size_t i) const { return basis.data() + i * dim(); }
};

/// Mean-centred SVD; K = smallest k whose cumulative explained variance
/// reaches variance_keep, clamped to [1, k_cap]. Basis rows are signed so
/// their largest-magnitude entry is positive.
OutputPcaModel fit_output_pca(const std::vector<std::vector<double>>& targets,
                              double variance_keep = 0.995, std::size_t k_cap = 64);

std::vector<double> project_target(const OutputPcaModel& model, const std::vector<double>& target);
std::vector<double> reconstruct_target(const OutputPcaModel& model, const std::vector<double>& coeffs);

/// Flat little-endian binary: u32 version, u64 n_points, u64 dim, u64 k,
/// f64 variance_keep, f64 total_variance, mean[dim], basis[k*dim], variance[k].
std::vector<std::uint8_t> serialize(const OutputPcaModel& model);
OutputPcaModel deserialize_pca(const std::vector<std::uint8_t>& bytes);
std::string pca_checksum(const OutputPcaModel& model);

inline constexpr const char* kPcaBin = "pca.bin";
inline constexpr const char* kPcaJson = "pca.json";

/// Writes pca.bin + pca.json (dims, variance_keep, checksum).
void save_pca(const OutputPcaModel& model, const fs::path& dir);
/// Throws ChecksumMismatch when pca.bin does not match its manifest.
OutputPcaModel load_pca(const fs::path& dir);

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

struct EncodedSample {
  std::string trial_id;
  Image image;
  std::optional<std::vector<double>> target;  // K PCA coefficients
  std::vector<double> target_full;            // interlaced normalized waveform (ground truth)
  Limb stance_limb = Limb::Right;
  MovementClass movement = MovementClass::Other;
  SubjectMeta subject;
  ScalingRecord scaling;
  bool mirrored = false;
  SourceKind source_kind = SourceKind::Accelerometers;
};

/// `<dir>/<trial_id>.png` + `<dir>/<trial_id>.json`.
void save_sample(const EncodedSample& sample, const fs::path& dir);
EncodedSample load_sample(const fs::path& json_path);

}  // namespace accel2grf::encode
