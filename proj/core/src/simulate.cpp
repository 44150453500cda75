#include "accel2grf/simulate.hpp"

#include "accel2grf/error.hpp"
#include "accel2grf/gait.hpp"
#include "accel2grf/ingest.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace accel2grf::simulate {

namespace {

constexpr double kPi = std::numbers::pi;

// Second-order Butterworth low-pass, run forward then backward.
std::vector<double> filtfilt(const std::vector<double>& x, double cutoff_hz, double rate_hz) {
  const double k = std::tan(kPi * cutoff_hz / rate_hz);
  const double norm = 1.0 / (1.0 + std::sqrt(2.0) * k + k * k);
  const double b0 = k * k * norm, b1 = 2.0 * b0, b2 = b0;
  const double a1 = 2.0 * (k * k - 1.0) * norm;
  const double a2 = (1.0 - std::sqrt(2.0) * k + k * k) * norm;

  const std::size_t n = x.size();
  const std::size_t pad = std::min<std::size_t>(n - 1, 12);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i > 0; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

  auto pass = [&](std::vector<double>& v) {
    double x1 = v.front(), x2 = v.front(), y1 = v.front(), y2 = v.front();
    for (auto& s : v) {
      const double in = s;
      const double out = b0 * in + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      s = out;
    }
  };
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace

SensorTrack double_differentiate(const SensorTrack& positions, const VirtualImuConfig& cfg) {
  const std::size_t n = positions.size();
  if (n < 3) throw Error(ErrorCode::TrackTooShort, "double differentiation needs at least 3 frames");
  if (!(positions.rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "position rate must be positive");
  if (cfg.output_hz > positions.rate_hz) {
    throw Error(ErrorCode::UpsampleRequested, "virtual IMU output rate exceeds marker rate");
  }

  std::vector<Vec3> p = positions.samples;
  if (cfg.lowpass_cutoff_hz) {
    if (!(*cfg.lowpass_cutoff_hz > 0.0) || *cfg.lowpass_cutoff_hz >= cfg.output_hz / 2.0) {
      throw Error(ErrorCode::InvalidArgument, "low-pass cutoff must lie in (0, output_hz/2)");
    }
    for (std::size_t axis = 0; axis < 3; ++axis) {
      std::vector<double> ch(n);
      for (std::size_t i = 0; i < n; ++i) ch[i] = p[i][axis];
      ch = filtfilt(ch, *cfg.lowpass_cutoff_hz, positions.rate_hz);
      for (std::size_t i = 0; i < n; ++i) p[i][axis] = ch[i];
    }
  }

  const double inv_h2 = positions.rate_hz * positions.rate_hz;
  SensorTrack acc;
  acc.location = positions.location;
  acc.kind = TrackKind::Acceleration;
  acc.rate_hz = positions.rate_hz;
  acc.t0_s = positions.t0_s;
  acc.samples.resize(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    acc.samples[i] = inv_h2 * ((p[i + 1] - p[i]) - (p[i] - p[i - 1]));
  }
  if (n >= 4) {
    acc.samples[0] = inv_h2 * (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]);
    acc.samples[n - 1] = inv_h2 * (2.0 * p[n - 1] - 5.0 * p[n - 2] + 4.0 * p[n - 3] - p[n - 4]);
  } else {
    acc.samples[0] = acc.samples[1];
    acc.samples[n - 1] = acc.samples[1];
  }
  if (cfg.include_gravity) {
    for (auto& a : acc.samples) a.z += kGravity;
  }
  return ingest::resample_uniform(acc, cfg.output_hz);
}

TrialRecord markers_to_accelerations(const TrialRecord& trial, const VirtualImuConfig& cfg) {
  TrialRecord out = trial;
  for (auto& s : out.sensors) {
    if (s.kind == TrackKind::Position) s = double_differentiate(s, cfg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

constexpr double kTrialDuration = 0.8;  // two swing periods
constexpr double kSwingHz = 2.5;
constexpr double kEnvelopeTau = 0.004;
constexpr double kForwardGain = 1.0;  // m/s^2, steady forward drift
constexpr double kTrendGain = 3.0;    // m/s^2 for accel/decel runs
constexpr double kCutVelocity = 2.6;  // lateral velocity change of a sidestep [m/s]
constexpr double kCutSigma = 0.08;    // s
constexpr double kImpactSpike = 14.0;  // m/s^2, stance shank
constexpr double kImpactDelay = 0.015;
constexpr double kImpactSigma = 0.012;

double gauss(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return std::exp(-0.5 * d * d);
}

struct SensorProfile {
  double swing;      // anterior oscillation amplitude
  double sway;       // lateral oscillation amplitude
  double bounce;     // vertical oscillation amplitude
  double gain_ant;   // coupling of F_y/BW * g into anterior
  double gain_lat;   // coupling of F_x/BW * g into lateral
  double gain_vert;  // coupling of F_z/BW * g into vertical
  Vec3 offset;
  double phase;  // +1 right side / pelvis, -1 left side
};

// Profiles for a right-stance trial; left stance is generated as its mirror.
SensorProfile profile(SensorLocation loc) {
  switch (loc) {
    case SensorLocation::Pelvis: return {10.0, 3.0, 1.0, 1.0, 1.0, 0.10, {0.0, 0.0, 1.0}, 1.0};
    case SensorLocation::RThigh: return {11.0, 3.5, 1.0, 0.8, 0.8, 0.08, {0.10, 0.0, 0.70}, 1.0};
    case SensorLocation::LThigh: return {11.0, 3.5, 1.0, 0.8, 0.8, 0.08, {-0.10, 0.0, 0.70}, -1.0};
    case SensorLocation::RShank: return {12.0, 4.0, 1.2, 0.6, 0.6, 0.06, {0.12, 0.0, 0.35}, 1.0};
    case SensorLocation::LShank: return {12.0, 4.0, 1.2, 0.6, 0.6, 0.06, {-0.12, 0.0, 0.35}, -1.0};
  }
  return {};
}

struct TrialParams {
  SubjectMeta subject;
  ForceShapeParams force;
  Limb limb = Limb::Right;
  std::size_t fs_frame = 0;
  std::size_t to_frame = 0;
  double t_fs = 0.0;
  double stance_s = 0.0;
  double t_mid = 0.0;
  double forward_gain = kForwardGain;
  double v0 = 0.0;
  bool sidestep = false;
  std::array<align::RotationMatrix3, 5> mounts;
};

double omega() { return 2.0 * kPi * kSwingHz; }

// Lab-frame acceleration (no gravity) of a right-stance sensor.
Vec3 accel_right(const TrialParams& tp, SensorLocation loc, double t) {
  const SensorProfile pr = profile(loc);
  const double s = t - tp.t_mid;
  const double w = omega();
  const double tau = (t - tp.t_fs) / tp.stance_s;
  const Wrench f = force_shape(tp.force, tau);

  Vec3 a;
  a.y = tp.forward_gain + pr.gain_ant * kGravity * f[kFy] + pr.phase * pr.swing * std::sin(w * s);
  a.x = pr.gain_lat * kGravity * f[kFx] + pr.phase * pr.sway * std::sin(0.5 * w * s);
  a.z = pr.gain_vert * kGravity * f[kFz] + pr.bounce * std::sin(2.0 * w * s);
  if (tp.sidestep) {
    a.x -= kCutVelocity / (kCutSigma * std::sqrt(2.0 * kPi)) * gauss(s, 0.0, kCutSigma);
  }
  if (loc == SensorLocation::RShank) {
    a.y -= kImpactSpike * gauss(t, tp.t_fs + kImpactDelay, kImpactSigma);
  }
  return a;
}

// Velocity at t = 0 that keeps the periodic terms oscillating about zero.
Vec3 initial_velocity(const TrialParams& tp, SensorLocation loc) {
  const SensorProfile pr = profile(loc);
  const double s = -tp.t_mid;
  const double w = omega();
  return {-pr.phase * pr.sway / (0.5 * w) * std::cos(0.5 * w * s),
          tp.v0 - pr.phase * pr.swing / w * std::cos(w * s),
          -pr.bounce / (2.0 * w) * std::cos(2.0 * w * s)};
}

Vec3 mirror_vec(Vec3 v) { return {-v.x, v.y, v.z}; }

// Generated sensor at output location `loc`, honouring the stance limb.
SensorLocation source_location(const TrialParams& tp, SensorLocation loc) {
  return tp.limb == Limb::Right ? loc : mirrored(loc);
}

Vec3 accel_lab(const TrialParams& tp, SensorLocation loc, double t) {
  const Vec3 a = accel_right(tp, source_location(tp, loc), t);
  return tp.limb == Limb::Right ? a : mirror_vec(a);
}

align::RotationMatrix3 random_rotation(Rng& rng) {
  double q[4];
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& c : q) {
      c = rng.normal();
      n2 += c * c;
    }
  } while (n2 < 1e-12);
  const double n = std::sqrt(n2);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  align::RotationMatrix3 r;
  r.m = {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
          {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
          {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
  return r;
}

TrialParams draw_params(const SynthSpec& spec, std::size_t index, Rng& rng) {
  TrialParams tp;
  tp.subject.mass_kg = rng.uniform(55.0, 95.0);
  tp.subject.height_m = rng.uniform(1.60, 1.95);

  const double v = spec.speed_mps;
  tp.sidestep = spec.movement == MovementClass::Sidestep;
  auto jitter = [&] { return rng.uniform(0.9, 1.1); };
  tp.force.base = 0.25;
  tp.force.impact = (0.55 + 0.18 * (v - 2.0)) * jitter();
  tp.force.active = (2.0 + 0.12 * (v - 3.0)) * jitter() * (tp.sidestep ? 0.95 : 1.0);
  tp.force.braking = (0.30 + 0.06 * (v - 3.0)) * jitter() * (tp.sidestep ? 1.3 : 1.0);
  tp.force.propulsion = (0.28 + 0.05 * (v - 3.0)) * jitter();
  tp.force.lateral = (tp.sidestep ? 0.45 : 0.06) * jitter();
  tp.force.moment_scale = (tp.sidestep ? 1.8 : 1.0) * rng.uniform(0.85, 1.15);

  switch (spec.limb) {
    case LimbPolicy::Right: tp.limb = Limb::Right; break;
    case LimbPolicy::Left: tp.limb = Limb::Left; break;
    case LimbPolicy::Alternate: tp.limb = index % 2 == 0 ? Limb::Right : Limb::Left; break;
  }

  const double stance_s = spec.stance_ms / 1000.0;
  const auto stance_frames = static_cast<std::size_t>(std::llround(stance_s * spec.force_hz));
  tp.fs_frame = static_cast<std::size_t>(std::llround((0.5 * kTrialDuration - 0.5 * stance_s) * spec.force_hz));
  tp.to_frame = tp.fs_frame + stance_frames;
  tp.t_fs = static_cast<double>(tp.fs_frame) / spec.force_hz;
  tp.stance_s = static_cast<double>(stance_frames) / spec.force_hz;
  tp.t_mid = tp.t_fs + 0.5 * tp.stance_s;

  if (spec.movement == MovementClass::RunAccel) tp.forward_gain = kTrendGain;
  else if (spec.movement == MovementClass::RunDecel) tp.forward_gain = -kTrendGain;
  tp.v0 = v - 0.5 * tp.forward_gain * kTrialDuration;

  for (auto& m : tp.mounts) m = align::RotationMatrix3::identity();
  if (spec.mount == MountPolicy::Random) {
    for (auto& m : tp.mounts) m = random_rotation(rng);
  } else if (spec.mount == MountPolicy::Explicit) {
    for (std::size_t i = 0; i < tp.mounts.size(); ++i) tp.mounts[i] = spec.mount_rotations[i];
  }
  return tp;
}

std::size_t frames_for(double rate_hz) {
  return static_cast<std::size_t>(std::llround(kTrialDuration * rate_hz));
}

}  // namespace

Wrench force_shape(const ForceShapeParams& p, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) return {};
  const double env = (1.0 - std::exp(-tau / kEnvelopeTau)) * (1.0 - std::exp(-(1.0 - tau) / kEnvelopeTau));
  Wrench w{};
  w[kFz] = env * (p.base + p.impact * gauss(tau, 0.13, 0.05) + p.active * gauss(tau, 0.45, 0.16));
  w[kFy] = env * (-p.braking * gauss(tau, 0.24, 0.09) + p.propulsion * gauss(tau, 0.72, 0.11));
  w[kFx] = env * (-p.lateral * gauss(tau, 0.45, 0.20));
  w[kMx] = env * p.moment_scale * (0.020 * gauss(tau, 0.30, 0.12) - 0.012 * gauss(tau, 0.75, 0.10));
  w[kMy] = env * p.moment_scale * (0.030 * gauss(tau, 0.25, 0.10) - 0.030 * gauss(tau, 0.70, 0.12));
  w[kMz] = env * p.moment_scale * (-0.006 * gauss(tau, 0.20, 0.08) + 0.010 * gauss(tau, 0.60, 0.15));
  return w;
}

void validate(const SynthSpec& spec) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, "synth spec: " + msg); };
  if (spec.n_trials == 0) fail("n_trials must be > 0");
  if (!(spec.stance_ms > 0.0) || spec.stance_ms > 500.0) fail("stance_ms must lie in (0, 500]");
  if (!(spec.noise_std_mps2 >= 0.0)) fail("noise_std_mps2 must be >= 0");
  if (!(spec.speed_mps > 0.0)) fail("speed_mps must be > 0");
  if (!(spec.marker_hz > 0.0) || !(spec.accel_hz > 0.0) || !(spec.force_hz > 0.0)) fail("rates must be positive");
  if (spec.force_hz * spec.stance_ms / 1000.0 < 20.0) fail("stance spans fewer than 20 force frames");
  const gait::MovementConfig mc;
  if (is_run(spec.movement) || spec.movement == MovementClass::Sidestep) {
    if (spec.speed_mps < mc.running_threshold_mps) fail("speed below the running threshold");
  }
  if (spec.movement == MovementClass::RunSlow || spec.movement == MovementClass::RunModerate ||
      spec.movement == MovementClass::RunFast) {
    if (gait::speed_bin(spec.speed_mps, false) != spec.movement) fail("speed outside the movement's speed bin");
  }
  if (spec.mount == MountPolicy::Explicit) {
    if (spec.mount_rotations.size() != kSensorOrder.size()) fail("explicit mount needs one rotation per sensor");
    for (const auto& r : spec.mount_rotations) {
      if (r.orthonormality_error() > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9) {
        fail("mount rotation is not a proper rotation");
      }
    }
  }
}

TrialRecord generate_synthetic_trial(const SynthSpec& spec, std::size_t index) {
  validate(spec);
  Rng rng(spec.seed, index);
  const TrialParams tp = draw_params(spec, index, rng);

  TrialRecord trial;
  std::ostringstream id;
  id << spec.id_prefix << '_';
  id.width(5);
  id.fill('0');
  id << index;
  trial.trial_id = id.str();
  trial.subject = tp.subject;
  trial.source_kind = spec.source_kind;
  trial.movement_label = spec.movement;
  trial.oracle = SynthOracle{static_cast<int>(tp.fs_frame), static_cast<int>(tp.to_frame), tp.limb,
                             spec.speed_mps, spec.movement, tp.force};

  for (auto loc : kSensorOrder) {
    SensorTrack track;
    track.location = loc;
    track.t0_s = 0.0;
    if (spec.source_kind == SourceKind::Markers) {
      track.kind = TrackKind::Position;
      track.rate_hz = spec.marker_hz;
      const std::size_t n = frames_for(spec.marker_hz);
      const double h = 1.0 / spec.marker_hz;
      const SensorLocation src = source_location(tp, loc);
      const SensorProfile pr = profile(src);
      // Discrete double integration: the central second difference of the
      // positions reproduces the sampled acceleration exactly.
      std::vector<Vec3> p(n);
      p[0] = {pr.offset.x, pr.offset.y, pr.offset.z};
      const Vec3 v0 = initial_velocity(tp, src);
      const Vec3 a0 = accel_right(tp, src, 0.0);
      p[1] = p[0] + h * v0 + (0.5 * h * h) * a0;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        const Vec3 a = accel_right(tp, src, static_cast<double>(i) * h);
        p[i + 1] = (p[i] + (p[i] - p[i - 1])) + (h * h) * a;
      }
      if (tp.limb == Limb::Left) {
        for (auto& v : p) v = mirror_vec(v);
      }
      track.samples = std::move(p);
    } else {
      track.kind = TrackKind::Acceleration;
      track.rate_hz = spec.accel_hz;
      const std::size_t n = frames_for(spec.accel_hz);
      const auto& mount = tp.mounts[column_index(loc)];
      const auto to_sensor = mount.transposed();
      track.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        Vec3 a = accel_lab(tp, loc, static_cast<double>(i) / spec.accel_hz);
        a.z += kGravity;
        track.samples[i] = to_sensor.apply(a);
      }
    }
    trial.sensors.push_back(std::move(track));
  }

  if (spec.source_kind == SourceKind::Accelerometers && spec.noise_std_mps2 > 0.0) {
    for (auto& track : trial.sensors) {
      for (auto& v : track.samples) {
        v.x += spec.noise_std_mps2 * rng.normal();
        v.y += spec.noise_std_mps2 * rng.normal();
        v.z += spec.noise_std_mps2 * rng.normal();
      }
    }
  }

  ForceTrack force;
  force.rate_hz = spec.force_hz;
  force.t0_s = 0.0;
  const std::size_t nf = frames_for(spec.force_hz);
  force.channels.resize(nf);
  const double bw = tp.subject.mass_kg * kGravity;
  const double bwh = bw * tp.subject.height_m;
  for (std::size_t i = 0; i < nf; ++i) {
    const double tau = (static_cast<double>(i) - static_cast<double>(tp.fs_frame)) /
                       static_cast<double>(tp.to_frame - tp.fs_frame);
    Wrench w = force_shape(tp.force, tau);
    if (tp.limb == Limb::Left) w = gait::mirror_wrench(w);
    for (std::size_t c = 0; c < 3; ++c) w[c] *= bw;
    for (std::size_t c = 3; c < 6; ++c) w[c] *= bwh;
    force.channels[i] = w;
  }
  trial.force = std::move(force);
  return trial;
}

CorpusManifest generate_corpus(const std::vector<SynthSpec>& specs, const fs::path& out_dir) {
  for (const auto& s : specs) validate(s);
  try {
    io::ensure_directory(out_dir / "trials");
  } catch (const Error& e) {
    throw Error(ErrorCode::IoError, e.what());
  }
  CorpusManifest manifest;
  std::set<std::string> ids;
  std::string index = "trial_id,movement,stance_limb,speed_mps,path\n";
  for (const auto& spec : specs) {
    for (std::size_t i = 0; i < spec.n_trials; ++i) {
      const TrialRecord trial = generate_synthetic_trial(spec, i);
      if (!ids.insert(trial.trial_id).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate trial id " + trial.trial_id +
                                                    "; give each spec a distinct id_prefix");
      }
      const std::string rel = "trials/" + trial.trial_id;
      ingest::write_trial(trial, out_dir / rel);
      CorpusEntry e{trial.trial_id, spec.movement, trial.oracle->stance_limb, spec.speed_mps, rel,
                    spec.source_kind};
      index += e.trial_id + "," + std::string(to_string(e.movement)) + "," + std::string(to_string(e.stance_limb)) +
               "," + io::format_double(e.speed_mps) + "," + e.path + "\n";
      manifest.entries.push_back(std::move(e));
    }
  }
  manifest.index_path = out_dir / kCorpusIndexName;
  io::write_text(manifest.index_path, index);
  return manifest;
}

CorpusManifest read_corpus_index(const fs::path& corpus_dir) {
  CorpusManifest manifest;
  manifest.index_path = corpus_dir / kCorpusIndexName;
  const std::string text = io::read_text(manifest.index_path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != 5) {
      throw Error(ErrorCode::MalformedCsv, manifest.index_path.string() + ":" + std::to_string(line_no));
    }
    CorpusEntry e;
    e.trial_id = std::string(f[0]);
    e.movement = parse_movement(f[1]).value_or(MovementClass::Other);
    e.stance_limb = parse_limb(f[2]).value_or(Limb::Right);
    e.speed_mps = io::parse_double(f[3]).value_or(0.0);
    e.path = std::string(f[4]);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace accel2grf::simulate
