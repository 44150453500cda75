#include "accel2grf/gait.hpp"

#include "accel2grf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace accel2grf::gait {

StanceWindow detect_stance_events(const ForceTrack& force, const ContactConfig& cfg) {
  const std::size_t n = force.size();
  const std::size_t run = std::max<std::size_t>(cfg.min_contact_frames, 1);

  std::size_t fs = n;
  for (std::size_t i = 0, count = 0; i < n; ++i) {
    if (force.channels[i][kFz] > cfg.threshold_n) {
      if (++count == run) {
        fs = i + 1 - run;
        break;
      }
    } else {
      count = 0;
    }
  }
  if (fs == n) throw Error(ErrorCode::NoContact, "no run of super-threshold vertical force");

  std::size_t to = n;
  for (std::size_t i = fs, count = 0; i < n; ++i) {
    if (force.channels[i][kFz] <= cfg.threshold_n) {
      if (++count == run) {
        to = i + 1 - run;
        break;
      }
    } else {
      count = 0;
    }
  }
  if (to == n) throw Error(ErrorCode::NoContact, "contact does not end before the track does");

  StanceWindow w;
  w.fs_frame = fs;
  w.to_frame = to;
  w.rate_hz = force.rate_hz;
  w.t0_s = force.t0_s;
  return w;
}

double track_position(double time_s, double track_t0_s, double track_rate_hz) {
  return (time_s - track_t0_s) * track_rate_hz;
}

namespace {

double shank_energy(const SensorTrack& track, const StanceWindow& window) {
  const double start = track_position(window.fs_time(), track.t0_s, track.rate_hz);
  const double end = track_position(window.to_time(), track.t0_s, track.rate_hz);
  const auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil(start - 1e-9)));
  const auto i1 = std::min(track.size(), static_cast<std::size_t>(std::max(0.0, std::floor(end + 1e-9))) + 1);
  double e = 0.0;
  for (std::size_t i = i0; i < i1; ++i) {
    const Vec3& v = track.samples[i];
    e += v.x * v.x + v.y * v.y + v.z * v.z;
  }
  return e;
}

// Mean horizontal velocity over frames [i0, i1) of a position track.
std::pair<double, double> mean_velocity(const SensorTrack& t, std::size_t i0, std::size_t i1) {
  i1 = std::min(i1, t.size());
  if (i1 <= i0 + 1) return {0.0, 0.0};
  const double dt = static_cast<double>(i1 - 1 - i0) / t.rate_hz;
  return {(t.samples[i1 - 1].x - t.samples[i0].x) / dt, (t.samples[i1 - 1].y - t.samples[i0].y) / dt};
}

}  // namespace

LimbDecision detect_stance_limb(const TrialRecord& trial, const StanceWindow& window) {
  const SensorTrack* left = trial.find(SensorLocation::LShank);
  const SensorTrack* right = trial.find(SensorLocation::RShank);
  if (!left || !right) throw Error(ErrorCode::MissingSensor, "both shank tracks are required");
  LimbDecision d;
  d.left_energy = shank_energy(*left, window);
  d.right_energy = shank_energy(*right, window);
  if (d.left_energy > d.right_energy) {
    d.limb = Limb::Left;
  } else {
    d.limb = Limb::Right;
    d.tie = d.left_energy == d.right_energy;
  }
  return d;
}

std::string_view to_string(SpeedTrend trend) {
  switch (trend) {
    case SpeedTrend::Steady: return "steady";
    case SpeedTrend::Accel: return "accel";
    case SpeedTrend::Decel: return "decel";
  }
  return "steady";
}

MovementClass speed_bin(double speed, bool strict_bins) {
  if (strict_bins) {
    if (speed >= 2.0 && speed < 3.0) return MovementClass::RunSlow;
    if (speed >= 4.0 && speed < 5.0) return MovementClass::RunModerate;
    if (speed > 6.0) return MovementClass::RunFast;
    return MovementClass::Other;
  }
  if (speed < 3.5) return MovementClass::RunSlow;
  if (speed < 5.5) return MovementClass::RunModerate;
  return MovementClass::RunFast;
}

MovementLabel classify_movement(const TrialRecord& trial, const std::optional<StanceWindow>& window,
                                const MovementConfig& cfg) {
  MovementLabel label;
  const SensorTrack* pelvis = trial.find(SensorLocation::Pelvis);
  if (!pelvis || pelvis->kind != TrackKind::Position) {
    if (trial.source_kind == SourceKind::Accelerometers || (pelvis && pelvis->kind != TrackKind::Position)) {
      label.cls = trial.movement_label.value_or(MovementClass::Other);
      label.from_manifest = true;
      return label;
    }
    throw Error(ErrorCode::MissingSensor, "pelvis position track is required");
  }
  const SensorTrack& p = *pelvis;
  const std::size_t n = p.size();
  if (n < 3) throw Error(ErrorCode::TrackTooShort, "pelvis track too short to classify");

  std::vector<double> speed(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dx = p.samples[i + 1].x - p.samples[i].x;
    const double dy = p.samples[i + 1].y - p.samples[i].y;
    speed[i] = std::hypot(dx, dy) * p.rate_hz;
  }
  double sum = 0.0;
  for (double s : speed) sum += s;
  label.mean_speed_mps = sum / static_cast<double>(speed.size());

  // Least-squares slope of speed over time.
  const double m = static_cast<double>(speed.size());
  double st = 0.0, stt = 0.0, sv = 0.0, stv = 0.0;
  for (std::size_t i = 0; i < speed.size(); ++i) {
    const double t = (static_cast<double>(i) + 0.5) / p.rate_hz;
    st += t;
    stt += t * t;
    sv += speed[i];
    stv += t * speed[i];
  }
  const double denom = m * stt - st * st;
  const double slope = denom > 0.0 ? (m * stv - st * sv) / denom : 0.0;

  std::size_t pre_end = n / 3;
  std::size_t post_begin = n - n / 3;
  double stance_s = static_cast<double>(n - 1) / p.rate_hz;
  std::optional<Limb> limb = trial.stance_limb;
  if (window) {
    const double fs = track_position(window->fs_time(), p.t0_s, p.rate_hz);
    const double to = track_position(window->to_time(), p.t0_s, p.rate_hz);
    pre_end = static_cast<std::size_t>(std::clamp(std::floor(fs), 2.0, static_cast<double>(n)));
    post_begin = static_cast<std::size_t>(std::clamp(std::ceil(to), 0.0, static_cast<double>(n - 2)));
    stance_s = window->duration_s();
    if (window->stance_limb) limb = window->stance_limb;
  }
  const double per_stance = slope * stance_s;
  if (per_stance > cfg.trend_threshold_mps_per_stance) label.trend = SpeedTrend::Accel;
  else if (per_stance < -cfg.trend_threshold_mps_per_stance) label.trend = SpeedTrend::Decel;

  const auto [vx0, vy0] = mean_velocity(p, 0, pre_end);
  const auto [vx1, vy1] = mean_velocity(p, post_begin, n);
  // Signed heading change, counter-clockwise (leftward) positive.
  const double turn = std::atan2(vx0 * vy1 - vy0 * vx1, vx0 * vx1 + vy0 * vy1) * 180.0 / std::numbers::pi;
  label.heading_change_deg = turn;

  if (label.mean_speed_mps < cfg.running_threshold_mps) {
    label.cls = MovementClass::Other;
    return label;
  }
  if (std::abs(turn) > cfg.sidestep_angle_deg) {
    // A cut toward the stance-limb side is a crossover: left turn off the left
    // limb, right turn off the right limb.
    const bool toward_left = turn > 0.0;
    if (limb && ((toward_left && *limb == Limb::Left) || (!toward_left && *limb == Limb::Right))) {
      label.crossover = true;
      label.cls = MovementClass::Other;
    } else {
      label.cls = MovementClass::Sidestep;
    }
    return label;
  }
  label.cls = speed_bin(label.mean_speed_mps, cfg.strict_bins);
  return label;
}

std::vector<double> normalize_span(std::span<const double> values, double start, double end,
                                   std::size_t n_points) {
  constexpr double kSlack = 1e-9;
  if (values.empty() || n_points < 2) {
    throw Error(ErrorCode::WindowOutOfBounds, "normalization needs data and at least 2 points");
  }
  const double last = static_cast<double>(values.size() - 1);
  if (start < -kSlack || end > last + kSlack || !(end > start)) {
    throw Error(ErrorCode::WindowOutOfBounds, "window [" + std::to_string(start) + ", " +
                                                  std::to_string(end) + "] outside track of " +
                                                  std::to_string(values.size()) + " frames");
  }
  start = std::clamp(start, 0.0, last);
  end = std::clamp(end, 0.0, last);
  auto sample = [&](double pos) {
    // time -> frame conversion can land an ulp off an integer frame
    if (const double r = std::round(pos); std::abs(pos - r) <= kSlack) pos = r;
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i0);
    if (frac == 0.0 || i0 + 1 >= values.size()) return values[std::min(i0, values.size() - 1)];
    return values[i0] + frac * (values[i0 + 1] - values[i0]);
  };
  std::vector<double> out(n_points);
  const double span = end - start;
  const double denom = static_cast<double>(n_points - 1);
  for (std::size_t k = 0; k + 1 < n_points; ++k) {
    out[k] = sample(start + span * static_cast<double>(k) / denom);
  }
  out[n_points - 1] = sample(end);
  return out;
}

std::vector<Vec3> normalize_stance(const SensorTrack& track, const StanceWindow& window,
                                   std::size_t n_points) {
  const double start = track_position(window.fs_time(), track.t0_s, track.rate_hz);
  const double end = track_position(window.to_time(), track.t0_s, track.rate_hz);
  std::vector<double> channel(track.size());
  std::vector<Vec3> out(n_points);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < track.size(); ++i) channel[i] = track.samples[i][axis];
    const auto r = normalize_span(channel, start, end, n_points);
    for (std::size_t k = 0; k < n_points; ++k) out[k][axis] = r[k];
  }
  return out;
}

std::vector<Wrench> normalize_stance(const ForceTrack& force, const StanceWindow& window,
                                     std::size_t n_points) {
  const double start = track_position(window.fs_time(), force.t0_s, force.rate_hz);
  const double end = track_position(window.to_time(), force.t0_s, force.rate_hz);
  std::vector<double> channel(force.size());
  std::vector<Wrench> out(n_points);
  for (std::size_t c = 0; c < kForceChannels; ++c) {
    for (std::size_t i = 0; i < force.size(); ++i) channel[i] = force.channels[i][c];
    const auto r = normalize_span(channel, start, end, n_points);
    for (std::size_t k = 0; k < n_points; ++k) out[k][c] = r[k];
  }
  return out;
}

std::size_t lead_in_start(const StanceWindow& window, double lead_fraction) {
  if (lead_fraction < 0.0) throw Error(ErrorCode::InvalidArgument, "lead_fraction must be >= 0");
  const double start = static_cast<double>(window.fs_frame) -
                       lead_fraction * static_cast<double>(window.to_frame - window.fs_frame);
  return start <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(start));
}

ForceTrack trim_lead_in(const ForceTrack& force, const StanceWindow& window, double lead_fraction) {
  const std::size_t begin = lead_in_start(window, lead_fraction);
  const std::size_t end = std::min(window.to_frame + 1, force.size());
  ForceTrack out;
  out.rate_hz = force.rate_hz;
  out.t0_s = force.t0_s + static_cast<double>(begin) / force.rate_hz;
  if (begin < end) out.channels.assign(force.channels.begin() + static_cast<std::ptrdiff_t>(begin),
                                       force.channels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

SensorTrack trim_lead_in(const SensorTrack& track, const StanceWindow& window, double lead_fraction) {
  const std::size_t begin_f = lead_in_start(window, lead_fraction);
  const double t_begin = window.t0_s + static_cast<double>(begin_f) / window.rate_hz;
  const double pos_begin = std::max(0.0, std::floor(track_position(t_begin, track.t0_s, track.rate_hz) + 1e-9));
  const double pos_end = std::ceil(track_position(window.to_time(), track.t0_s, track.rate_hz) - 1e-9);
  const auto begin = static_cast<std::size_t>(pos_begin);
  const auto end = std::min(track.size(), static_cast<std::size_t>(std::max(0.0, pos_end)) + 1);
  SensorTrack out;
  out.location = track.location;
  out.kind = track.kind;
  out.rate_hz = track.rate_hz;
  out.t0_s = track.t0_s + static_cast<double>(begin) / track.rate_hz;
  if (begin < end) out.samples.assign(track.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                      track.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

Wrench mirror_wrench(const Wrench& w) {
  return {-w[kFx], w[kFy], w[kFz], w[kMx], -w[kMy], -w[kMz]};
}

TrialRecord mirror_left_to_right(const TrialRecord& trial) {
  const bool left = trial.stance_limb == Limb::Left;
  const bool restore = trial.mirrored && trial.stance_limb == Limb::Right;
  if (!left && !restore) throw Error(ErrorCode::NotLeftStance, trial.trial_id + " is not a left-stance trial");

  TrialRecord out = trial;
  for (auto& s : out.sensors) {
    s.location = mirrored(s.location);
    if (s.kind == TrackKind::Magnitude) continue;
    for (auto& v : s.samples) v.x = -v.x;
  }
  std::sort(out.sensors.begin(), out.sensors.end(),
            [](const SensorTrack& a, const SensorTrack& b) { return a.location < b.location; });
  if (out.force) {
    for (auto& w : out.force->channels) w = mirror_wrench(w);
  }
  out.stance_limb = left ? Limb::Right : Limb::Left;
  out.mirrored = left;
  return out;
}

}  // namespace accel2grf::gait
