#include "accel2grf/encode.hpp"

#include "accel2grf/error.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/png_io.hpp"

#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace accel2grf::encode {

using nlohmann::json;

RealGrid build_acceleration_grid(const TrialRecord& trial, const gait::StanceWindow& window,
                                 const EncodeOptions& opts) {
  if (window.to_frame <= window.fs_frame) throw Error(ErrorCode::EmptyWindow, trial.trial_id + ": empty stance window");
  gait::StanceWindow span = window;
  if (opts.lead_fraction) span.fs_frame = gait::lead_in_start(window, *opts.lead_fraction);

  RealGrid grid;
  grid.rows = opts.n_points;
  grid.cols = kSensorOrder.size();
  grid.values.resize(grid.rows * grid.cols);
  for (std::size_t c = 0; c < kSensorOrder.size(); ++c) {
    const SensorTrack* track = trial.find(kSensorOrder[c]);
    if (!track) {
      throw Error(ErrorCode::MissingSensor, trial.trial_id + ": missing " + std::string(to_string(kSensorOrder[c])));
    }
    const auto frames = gait::normalize_stance(*track, span, opts.n_points);
    for (std::size_t k = 0; k < opts.n_points; ++k) {
      const std::size_t row = opts.time_upwards ? opts.n_points - 1 - k : k;
      grid.at(row, c) = frames[k];
    }
  }
  return grid;
}

QuantizedGrid quantize_grid(const RealGrid& grid, const EncodeOptions& opts) {
  QuantizedGrid q;
  q.grid.height = grid.rows;
  q.grid.width = grid.cols;
  q.grid.pixels.assign(grid.rows * grid.cols * 3, 0);
  q.scaling.fixed_range = opts.fixed_range_mps2.has_value();
  for (std::size_t ch = 0; ch < 3; ++ch) {
    ChannelScale sc;
    if (opts.fixed_range_mps2) {
      sc = {-*opts.fixed_range_mps2, *opts.fixed_range_mps2};
    } else {
      sc.min = grid.values.empty() ? 0.0 : grid.values.front()[ch];
      sc.max = sc.min;
      for (const auto& v : grid.values) {
        sc.min = std::min(sc.min, v[ch]);
        sc.max = std::max(sc.max, v[ch]);
      }
    }
    q.scaling.channels[ch] = sc;
    const double range = sc.max - sc.min;
    if (!(range > 0.0)) continue;  // degenerate channel stays 0
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
      const double v = std::clamp(grid.values[i][ch], sc.min, sc.max);
      q.grid.pixels[i * 3 + ch] = static_cast<std::uint8_t>(std::lround(255.0 * (v - sc.min) / range));
    }
  }
  return q;
}

RealGrid decode_image_grid(const Image& grid, const ScalingRecord& scaling) {
  RealGrid out;
  out.rows = grid.height;
  out.cols = grid.width;
  out.values.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const auto& sc = scaling.channels[ch];
      const double range = sc.max - sc.min;
      out.values[i][ch] = range > 0.0 ? sc.min + range * static_cast<double>(grid.pixels[i * 3 + ch]) / 255.0 : sc.min;
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
  Image dst;
  dst.height = height;
  dst.width = width;
  dst.pixels.resize(height * width * 3);
  auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    if (n_out <= 1 || n_in <= 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
  };
  for (std::size_t r = 0; r < height; ++r) {
    const double sy = coord(r, height, src.height);
    const auto y0 = std::min(static_cast<std::size_t>(sy), src.height - 1);
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double sx = coord(c, width, src.width);
      const auto x0 = std::min(static_cast<std::size_t>(sx), src.width - 1);
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double top = src.at(y0, x0, ch) + fx * (src.at(y0, x1, ch) - src.at(y0, x0, ch));
        const double bot = src.at(y1, x0, ch) + fx * (src.at(y1, x1, ch) - src.at(y1, x0, ch));
        const double v = top + fy * (bot - top);
        dst.pixels[(r * width + c) * 3 + ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

EncodedImage encode_image(const TrialRecord& trial, const gait::StanceWindow& window, const EncodeOptions& opts) {
  EncodedImage out;
  out.pre_resize = quantize_grid(build_acceleration_grid(trial, window, opts), opts);
  out.image = resize_bilinear(out.pre_resize.grid, opts.size, opts.size);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> build_target(const ForceTrack& force, const gait::StanceWindow& window,
                                 const SubjectMeta& subject, std::size_t n_points) {
  if (!(subject.mass_kg > 0.0) || !(subject.height_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "subject mass and height must be positive");
  }
  const auto frames = gait::normalize_stance(force, window, n_points);
  const double bw = subject.mass_kg * kGravity;
  const double bwh = bw * subject.height_m;
  std::vector<double> target(kForceChannels * n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    for (std::size_t c = 0; c < kForceChannels; ++c) {
      target[k * kForceChannels + c] = frames[k][c] / (c < 3 ? bw : bwh);
    }
  }
  return target;
}

std::array<std::vector<double>, kForceChannels> deinterlace(const std::vector<double>& target) {
  if (target.size() % kForceChannels != 0) {
    throw Error(ErrorCode::DimensionMismatch, "target length is not a multiple of 6");
  }
  const std::size_t n = target.size() / kForceChannels;
  std::array<std::vector<double>, kForceChannels> out;
  for (std::size_t c = 0; c < kForceChannels; ++c) {
    out[c].resize(n);
    for (std::size_t k = 0; k < n; ++k) out[c][k] = target[k * kForceChannels + c];
  }
  return out;
}

std::vector<double> interlace(const std::array<std::vector<double>, kForceChannels>& channels) {
  const std::size_t n = channels[0].size();
  std::vector<double> out(n * kForceChannels);
  for (std::size_t c = 0; c < kForceChannels; ++c) {
    if (channels[c].size() != n) throw Error(ErrorCode::DimensionMismatch, "channel lengths differ");
    for (std::size_t k = 0; k < n; ++k) out[k * kForceChannels + c] = channels[c][k];
  }
  return out;
}

std::array<std::vector<double>, kForceChannels> denormalize(
    const std::array<std::vector<double>, kForceChannels>& channels, const SubjectMeta& subject) {
  const double bw = subject.mass_kg * kGravity;
  const double bwh = bw * subject.height_m;
  auto out = channels;
  for (std::size_t c = 0; c < kForceChannels; ++c) {
    for (auto& v : out[c]) v *= (c < 3 ? bw : bwh);
  }
  return out;
}

OutputPcaModel fit_output_pca(const std::vector<std::vector<double>>& targets, double variance_keep,
                              std::size_t k_cap) {
  if (targets.size() < 2) throw Error(ErrorCode::TooFewSamples, "output PCA needs at least 2 targets");
  if (!(variance_keep > 0.0 && variance_keep <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "variance_keep must lie in (0, 1]");
  }
  const std::size_t dim = targets.front().size();
  if (dim == 0 || dim % kForceChannels != 0) throw Error(ErrorCode::DimensionMismatch, "target length must be 6 * n_points");
  for (const auto& t : targets) {
    if (t.size() != dim) throw Error(ErrorCode::DimensionMismatch, "targets differ in length");
  }
  const auto n = static_cast<Eigen::Index>(targets.size());
  const auto d = static_cast<Eigen::Index>(dim);

  OutputPcaModel model;
  model.n_points = dim / kForceChannels;
  model.variance_keep = variance_keep;
  model.mean.assign(dim, 0.0);
  for (const auto& t : targets) {
    for (std::size_t j = 0; j < dim; ++j) model.mean[j] += t[j];
  }
  for (auto& m : model.mean) m /= static_cast<double>(targets.size());

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = targets[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - model.mean[static_cast<std::size_t>(j)];
    }
  }
  const double denom = static_cast<double>(n - 1);
  model.total_variance = x.squaredNorm() / denom;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();

  std::size_t k = 1;
  if (model.total_variance > 0.0) {
    double cum = 0.0;
    k = static_cast<std::size_t>(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      cum += s(i) * s(i) / denom;
      if (cum / model.total_variance >= variance_keep) {
        k = static_cast<std::size_t>(i) + 1;
        break;
      }
    }
  }
  k = std::clamp<std::size_t>(k, 1, std::max<std::size_t>(1, std::min<std::size_t>(k_cap, static_cast<std::size_t>(s.size()))));

  model.basis.assign(k * dim, 0.0);
  model.explained_variance.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < dim; ++j) {
      if (std::abs(v(static_cast<Eigen::Index>(j), col)) > std::abs(v(static_cast<Eigen::Index>(arg), col))) arg = j;
    }
    const double sign = v(static_cast<Eigen::Index>(arg), col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < dim; ++j) model.basis[r * dim + j] = sign * v(static_cast<Eigen::Index>(j), col);
    model.explained_variance[r] = s(col) * s(col) / denom;
  }
  return model;
}

std::vector<double> project_target(const OutputPcaModel& model, const std::vector<double>& target) {
  if (target.size() != model.dim()) throw Error(ErrorCode::DimensionMismatch, "target length differs from PCA dim");
  std::vector<double> out(model.k(), 0.0);
  for (std::size_t r = 0; r < model.k(); ++r) {
    const double* row = model.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < model.dim(); ++j) acc += row[j] * (target[j] - model.mean[j]);
    out[r] = acc;
  }
  return out;
}

std::vector<double> reconstruct_target(const OutputPcaModel& model, const std::vector<double>& coeffs) {
  if (coeffs.size() != model.k()) throw Error(ErrorCode::DimensionMismatch, "coefficient count differs from K");
  std::vector<double> out = model.mean;
  for (std::size_t r = 0; r < model.k(); ++r) {
    const double* row = model.row(r);
    for (std::size_t j = 0; j < model.dim(); ++j) out[j] += coeffs[r] * row[j];
  }
  return out;
}

namespace {
constexpr std::uint32_t kPcaVersion = 1;
}

std::vector<std::uint8_t> serialize(const OutputPcaModel& model) {
  io::ByteWriter w;
  w.put_u32(kPcaVersion);
  w.put_u64(model.n_points);
  w.put_u64(model.dim());
  w.put_u64(model.k());
  w.put_f64(model.variance_keep);
  w.put_f64(model.total_variance);
  for (double v : model.mean) w.put_f64(v);
  for (double v : model.basis) w.put_f64(v);
  for (double v : model.explained_variance) w.put_f64(v);
  return w.take();
}

OutputPcaModel deserialize_pca(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes);
  if (r.get_u32() != kPcaVersion) throw Error(ErrorCode::IoError, "unsupported PCA file version");
  OutputPcaModel m;
  m.n_points = r.get_u64();
  const auto dim = r.get_u64();
  const auto k = r.get_u64();
  m.variance_keep = r.get_f64();
  m.total_variance = r.get_f64();
  m.mean.resize(dim);
  for (auto& v : m.mean) v = r.get_f64();
  m.basis.resize(k * dim);
  for (auto& v : m.basis) v = r.get_f64();
  m.explained_variance.resize(k);
  for (auto& v : m.explained_variance) v = r.get_f64();
  if (!r.done()) throw Error(ErrorCode::IoError, "trailing bytes in PCA file");
  return m;
}

std::string pca_checksum(const OutputPcaModel& model) { return io::sha256_hex(serialize(model)); }

void save_pca(const OutputPcaModel& model, const fs::path& dir) {
  io::ensure_directory(dir);
  const auto bytes = serialize(model);
  io::write_bytes(dir / kPcaBin, bytes);
  json j{{"format", "accel2grf-output-pca"},
         {"version", kPcaVersion},
         {"n_points", model.n_points},
         {"dim", model.dim()},
         {"k", model.k()},
         {"variance_keep", model.variance_keep},
         {"total_variance", model.total_variance},
         {"explained_variance", model.explained_variance},
         {"normalization", {{"force", "body_weight"}, {"moment", "body_weight_height"}, {"gravity", kGravity}}},
         {"checksum", io::sha256_hex(bytes)}};
  io::write_text(dir / kPcaJson, j.dump(2) + "\n");
}

OutputPcaModel load_pca(const fs::path& dir) {
  const auto manifest = json::parse(io::read_text(dir / kPcaJson));
  const auto bytes = io::read_bytes(dir / kPcaBin);
  if (io::sha256_hex(bytes) != manifest.at("checksum").get<std::string>()) {
    throw Error(ErrorCode::ChecksumMismatch, (dir / kPcaBin).string() + " does not match its manifest");
  }
  return deserialize_pca(bytes);
}

// ---------------------------------------------------------------------------

void save_sample(const EncodedSample& sample, const fs::path& dir) {
  io::ensure_directory(dir);
  write_png(dir / (sample.trial_id + ".png"), sample.image);
  json scaling = json::array();
  for (const auto& c : sample.scaling.channels) scaling.push_back({{"min", c.min}, {"max", c.max}});
  json j{{"trial_id", sample.trial_id},
         {"image", sample.trial_id + ".png"},
         {"stance_limb", std::string(to_string(sample.stance_limb))},
         {"movement", std::string(to_string(sample.movement))},
         {"mirrored", sample.mirrored},
         {"source_kind", std::string(to_string(sample.source_kind))},
         {"subject", {{"mass_kg", sample.subject.mass_kg}, {"height_m", sample.subject.height_m}}},
         {"scaling_record", {{"channels", scaling}, {"fixed_range", sample.scaling.fixed_range}}},
         {"target_full", sample.target_full}};
  if (sample.target) j["target"] = *sample.target;
  io::write_text(dir / (sample.trial_id + ".json"), j.dump() + "\n");
}

EncodedSample load_sample(const fs::path& json_path) {
  const auto j = json::parse(io::read_text(json_path));
  EncodedSample s;
  s.trial_id = j.at("trial_id").get<std::string>();
  s.image = read_png(json_path.parent_path() / j.at("image").get<std::string>());
  s.stance_limb = parse_limb(j.at("stance_limb").get<std::string>()).value_or(Limb::Right);
  s.movement = parse_movement(j.at("movement").get<std::string>()).value_or(MovementClass::Other);
  s.mirrored = j.value("mirrored", false);
  s.source_kind = parse_source_kind(j.value("source_kind", std::string("accelerometers"))).value_or(SourceKind::Accelerometers);
  s.subject.mass_kg = j.at("subject").at("mass_kg").get<double>();
  s.subject.height_m = j.at("subject").at("height_m").get<double>();
  const auto& sc = j.at("scaling_record");
  s.scaling.fixed_range = sc.value("fixed_range", false);
  for (std::size_t c = 0; c < 3; ++c) {
    s.scaling.channels[c].min = sc.at("channels").at(c).at("min").get<double>();
    s.scaling.channels[c].max = sc.at("channels").at(c).at("max").get<double>();
  }
  s.target_full = j.at("target_full").get<std::vector<double>>();
  if (j.contains("target")) s.target = j.at("target").get<std::vector<double>>();
  return s;
}

}  // namespace accel2grf::encode
