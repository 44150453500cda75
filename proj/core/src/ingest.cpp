#include "accel2grf/ingest.hpp"

#include "accel2grf/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace accel2grf::ingest {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string where(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

double acceleration_unit_scale(const std::string& unit, const fs::path& file) {
  if (unit == "m/s^2" || unit == "m/s2") return 1.0;
  if (unit == "g") return kGravity;
  if (unit == "mm/s^2") return 1e-3;
  throw Error(ErrorCode::UnitError, file.string() + ": unsupported acceleration unit '" + unit + "'");
}

double position_unit_scale(const std::string& unit, const fs::path& file) {
  if (unit == "m") return 1.0;
  if (unit == "mm") return 1e-3;
  if (unit == "cm") return 1e-2;
  throw Error(ErrorCode::UnitError, file.string() + ": unsupported position unit '" + unit + "'");
}

// axis_order[i] names the canonical axis held by CSV data column i.
std::array<std::size_t, 3> parse_axis_order(const std::string& order, const fs::path& file) {
  std::array<std::size_t, 3> map{};
  std::set<char> seen;
  if (order.size() != 3) {
    throw Error(ErrorCode::UnitError, file.string() + ": axis_order must be a permutation of xyz");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const char c = order[i];
    if (c < 'x' || c > 'z' || !seen.insert(c).second) {
      throw Error(ErrorCode::UnitError, file.string() + ": axis_order must be a permutation of xyz");
    }
    map[i] = static_cast<std::size_t>(c - 'x');
  }
  return map;
}

struct CsvTable {
  std::vector<double> t;
  std::vector<std::vector<double>> rows;  // data columns only
};

CsvTable read_csv(const fs::path& file, const std::vector<std::string>& header, bool allow_gaps) {
  if (!fs::exists(file)) throw Error(ErrorCode::MissingFile, file.string() + " does not exist");
  const std::string text = io::read_text(file);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  CsvTable table;

  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedCsv, where(file, 1) + " empty file");
  ++line_no;
  const auto head = io::split_csv_line(line);
  if (head.size() != header.size()) {
    throw Error(ErrorCode::MalformedCsv, where(file, line_no) + " unexpected header");
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (head[i] != header[i]) {
      throw Error(ErrorCode::MalformedCsv,
                  where(file, line_no) + " expected column '" + header[i] + "'");
    }
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = io::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::MalformedCsv, where(file, line_no) + " wrong field count");
    }
    const auto t = io::parse_double(fields[0]);
    if (!t) throw Error(ErrorCode::MalformedCsv, where(file, line_no) + " bad time value");
    if (!table.t.empty() && !(*t > table.t.back())) {
      throw Error(ErrorCode::MalformedCsv, where(file, line_no) + " time not increasing");
    }
    std::vector<double> row(header.size() - 1);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (allow_gaps && fields[c].empty()) {
        row[c - 1] = kNaN;
        continue;
      }
      const auto v = io::parse_double(fields[c]);
      if (!v) {
        throw Error(ErrorCode::MalformedCsv,
                    where(file, line_no) + " column " + std::to_string(c) + " is not a finite number");
      }
      row[c - 1] = *v;
    }
    table.t.push_back(*t);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string fmt_or_empty(double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); }

json oracle_to_json(const SynthOracle& o) {
  return json{{"fs_frame", o.fs_frame},
              {"to_frame", o.to_frame},
              {"stance_limb", std::string(to_string(o.stance_limb))},
              {"speed_mps", o.speed_mps},
              {"movement", std::string(to_string(o.movement))},
              {"force",
               {{"impact", o.force.impact},
                {"active", o.force.active},
                {"base", o.force.base},
                {"braking", o.force.braking},
                {"propulsion", o.force.propulsion},
                {"lateral", o.force.lateral},
                {"moment_scale", o.force.moment_scale}}}};
}

SynthOracle oracle_from_json(const json& j) {
  SynthOracle o;
  o.fs_frame = j.at("fs_frame").get<int>();
  o.to_frame = j.at("to_frame").get<int>();
  o.stance_limb = parse_limb(j.at("stance_limb").get<std::string>()).value_or(Limb::Right);
  o.speed_mps = j.at("speed_mps").get<double>();
  o.movement = parse_movement(j.at("movement").get<std::string>()).value_or(MovementClass::Other);
  const auto& f = j.at("force");
  o.force.impact = f.at("impact").get<double>();
  o.force.active = f.at("active").get<double>();
  o.force.base = f.at("base").get<double>();
  o.force.braking = f.at("braking").get<double>();
  o.force.propulsion = f.at("propulsion").get<double>();
  o.force.lateral = f.at("lateral").get<double>();
  o.force.moment_scale = f.at("moment_scale").get<double>();
  return o;
}

std::string sensor_file_name(SensorLocation loc) {
  std::string name(to_string(loc));
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return name + ".csv";
}

}  // namespace

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::GapTooLong: return "GapTooLong";
    case RejectReason::NoContact: return "NoContact";
    case RejectReason::DurationTooShort: return "DurationTooShort";
  }
  return "Unknown";
}

TrialRecord parse_trial(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::MissingFile, manifest_path.string() + " does not exist");
  }
  json m;
  try {
    m = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedCsv, manifest_path.string() + ": invalid JSON: " + e.what());
  }

  TrialRecord trial;
  try {
    trial.trial_id = m.at("trial_id").get<std::string>();
    const auto& subj = m.at("subject");
    trial.subject.mass_kg = subj.at("mass_kg").get<double>();
    trial.subject.height_m = subj.at("height_m").get<double>();
    if (subj.contains("sex")) {
      const auto s = subj.at("sex").get<std::string>();
      trial.subject.sex = s == "female" ? Sex::Female : (s == "male" ? Sex::Male : Sex::Other);
    }
    if (!(trial.subject.mass_kg > 0.0) || !(trial.subject.height_m > 0.0)) {
      throw Error(ErrorCode::UnitError, manifest_path.string() + ": subject mass and height must be positive");
    }
    if (m.contains("source_kind")) {
      const auto sk = parse_source_kind(m.at("source_kind").get<std::string>());
      if (!sk) throw Error(ErrorCode::UnitError, manifest_path.string() + ": unknown source_kind");
      trial.source_kind = *sk;
    }
    if (m.contains("movement_label") && !m.at("movement_label").is_null()) {
      trial.movement_label = parse_movement(m.at("movement_label").get<std::string>());
    }
    if (m.contains("stance_limb") && !m.at("stance_limb").is_null()) {
      trial.stance_limb = parse_limb(m.at("stance_limb").get<std::string>());
    }
    trial.mirrored = m.value("mirrored", false);
    if (m.contains("oracle")) trial.oracle = oracle_from_json(m.at("oracle"));

    std::set<SensorLocation> seen;
    for (const auto& s : m.at("sensors")) {
      const auto name = s.at("location").get<std::string>();
      const auto loc = parse_sensor_location(name);
      if (!loc) {
        throw Error(ErrorCode::UnknownSensorName, manifest_path.string() + ": unknown sensor '" + name + "'");
      }
      if (!seen.insert(*loc).second) {
        throw Error(ErrorCode::UnknownSensorName, manifest_path.string() + ": duplicate sensor '" + name + "'");
      }
      const fs::path file = dir / s.at("file").get<std::string>();
      SensorTrack track;
      track.location = *loc;
      track.rate_hz = s.at("rate_hz").get<double>();
      if (!(track.rate_hz > 0.0)) throw Error(ErrorCode::UnitError, file.string() + ": rate_hz must be positive");
      const auto kind = parse_track_kind(s.value("kind", std::string("acceleration")));
      if (!kind) throw Error(ErrorCode::UnitError, file.string() + ": unknown track kind");
      track.kind = *kind;
      const double scale = track.kind == TrackKind::Position
                               ? position_unit_scale(s.value("units", std::string("m")), file)
                               : acceleration_unit_scale(s.value("units", std::string("m/s^2")), file);
      const auto axes = parse_axis_order(s.value("axis_order", std::string("xyz")), file);

      const auto table = read_csv(file, {"t", "x", "y", "z"}, /*allow_gaps=*/true);
      if (table.t.empty()) throw Error(ErrorCode::MalformedCsv, where(file, 2) + " no data rows");
      track.t0_s = table.t.front();
      track.samples.resize(table.rows.size());
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        Vec3 v;
        for (std::size_t c = 0; c < 3; ++c) v[axes[c]] = table.rows[i][c] * scale;
        track.samples[i] = v;
      }
      trial.sensors.push_back(std::move(track));
    }
    for (auto loc : kSensorOrder) {
      if (!seen.count(loc)) {
        throw Error(ErrorCode::MissingFile, manifest_path.string() + ": no track for sensor location " +
                                                std::string(to_string(loc)) + " (incomplete topology)");
      }
    }
    std::sort(trial.sensors.begin(), trial.sensors.end(),
              [](const SensorTrack& a, const SensorTrack& b) { return a.location < b.location; });

    const double rate0 = trial.sensors.front().rate_hz;
    const std::size_t len0 = trial.sensors.front().size();
    for (const auto& s : trial.sensors) {
      if (s.rate_hz != rate0 || s.size() != len0) {
        throw Error(ErrorCode::UnitError, manifest_path.string() +
                                              ": sensor tracks must share one rate and frame count");
      }
    }

    if (m.contains("force") && !m.at("force").is_null()) {
      const auto& f = m.at("force");
      const fs::path file = dir / f.at("file").get<std::string>();
      ForceTrack force;
      force.rate_hz = f.at("rate_hz").get<double>();
      if (!(force.rate_hz > 0.0)) throw Error(ErrorCode::UnitError, file.string() + ": rate_hz must be positive");
      const auto force_unit = f.value("force_units", std::string("N"));
      const auto moment_unit = f.value("moment_units", std::string("N*m"));
      double fscale = 1.0;
      double mscale = 1.0;
      if (force_unit == "kN") fscale = 1e3;
      else if (force_unit != "N") throw Error(ErrorCode::UnitError, file.string() + ": unsupported force unit");
      if (moment_unit == "N*mm") mscale = 1e-3;
      else if (moment_unit != "N*m") throw Error(ErrorCode::UnitError, file.string() + ": unsupported moment unit");

      const auto table = read_csv(file, {"t", "fx", "fy", "fz", "mx", "my", "mz"}, /*allow_gaps=*/false);
      if (table.t.size() < 2) throw Error(ErrorCode::MalformedCsv, where(file, 2) + " force track needs >= 2 rows");
      force.t0_s = table.t.front();
      force.channels.resize(table.rows.size());
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (std::size_t c = 0; c < kForceChannels; ++c) {
          force.channels[i][c] = table.rows[i][c] * (c < 3 ? fscale : mscale);
        }
      }
      trial.force = std::move(force);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedCsv, manifest_path.string() + ": " + e.what());
  }
  return trial;
}

void write_trial(const TrialRecord& trial, const fs::path& dir) {
  io::ensure_directory(dir);
  json m;
  m["trial_id"] = trial.trial_id;
  m["subject"] = {{"mass_kg", trial.subject.mass_kg}, {"height_m", trial.subject.height_m}};
  if (trial.subject.sex) {
    m["subject"]["sex"] = *trial.subject.sex == Sex::Female ? "female"
                          : *trial.subject.sex == Sex::Male ? "male" : "other";
  }
  m["source_kind"] = std::string(to_string(trial.source_kind));
  if (trial.movement_label) m["movement_label"] = std::string(to_string(*trial.movement_label));
  if (trial.stance_limb) m["stance_limb"] = std::string(to_string(*trial.stance_limb));
  if (trial.mirrored) m["mirrored"] = true;

  json sensors = json::array();
  for (const auto& s : trial.sensors) {
    const std::string file = sensor_file_name(s.location);
    sensors.push_back({{"location", std::string(to_string(s.location))},
                       {"file", file},
                       {"rate_hz", s.rate_hz},
                       {"kind", std::string(to_string(s.kind))},
                       {"units", s.kind == TrackKind::Position ? "m" : "m/s^2"}});
    std::string text = "t,x,y,z\n";
    text.reserve(s.size() * 64);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double t = s.t0_s + static_cast<double>(i) / s.rate_hz;
      text += io::format_double(t);
      for (std::size_t c = 0; c < 3; ++c) {
        text += ',';
        text += fmt_or_empty(s.samples[i][c]);
      }
      text += '\n';
    }
    io::write_text(dir / file, text);
  }
  m["sensors"] = sensors;

  if (trial.force) {
    const auto& f = *trial.force;
    m["force"] = {{"file", "force.csv"}, {"rate_hz", f.rate_hz}};
    std::string text = "t,fx,fy,fz,mx,my,mz\n";
    text.reserve(f.size() * 128);
    for (std::size_t i = 0; i < f.size(); ++i) {
      text += io::format_double(f.t0_s + static_cast<double>(i) / f.rate_hz);
      for (double v : f.channels[i]) {
        text += ',';
        text += io::format_double(v);
      }
      text += '\n';
    }
    io::write_text(dir / "force.csv", text);
  }
  if (trial.oracle) m["oracle"] = oracle_to_json(*trial.oracle);
  io::write_text(dir / kManifestName, m.dump(2) + "\n");
}

SensorTrack resample_uniform(const SensorTrack& track, double target_hz) {
  if (!(target_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "target rate must be positive");
  if (target_hz > track.rate_hz) {
    throw Error(ErrorCode::UpsampleRequested, "target " + io::format_double(target_hz) +
                                                  " Hz exceeds source " + io::format_double(track.rate_hz) + " Hz");
  }
  if (track.size() < 2) throw Error(ErrorCode::TrackTooShort, "resampling needs at least 2 samples");

  SensorTrack out;
  out.location = track.location;
  out.kind = track.kind;
  out.rate_hz = target_hz;
  out.t0_s = track.t0_s;
  if (target_hz == track.rate_hz) {
    out.samples = track.samples;
    return out;
  }
  const double last = static_cast<double>(track.size() - 1);
  const double ratio = track.rate_hz / target_hz;  // source samples per output sample
  const auto n_out = static_cast<std::size_t>(std::floor(last / ratio + 1e-9)) + 1;
  out.samples.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double pos = std::min(static_cast<double>(k) * track.rate_hz / target_hz, last);
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i0);
    if (frac == 0.0 || i0 + 1 >= track.size()) {
      out.samples[k] = track.samples[i0];
    } else {
      const Vec3& a = track.samples[i0];
      const Vec3& b = track.samples[i0 + 1];
      out.samples[k] = {a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y), a.z + frac * (b.z - a.z)};
    }
  }
  return out;
}

namespace {

// Natural cubic spline through (xs, ys) evaluated at x.
double natural_spline(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const std::size_t n = xs.size();
  if (n == 1) return ys[0];
  if (n == 2) return ys[0] + (ys[1] - ys[0]) * (x - xs[0]) / (xs[1] - xs[0]);
  std::vector<double> h(n - 1), alpha(n, 0.0), l(n, 1.0), mu(n, 0.0), z(n, 0.0), c(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = xs[i + 1] - xs[i];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    alpha[i] = 3.0 / h[i] * (ys[i + 1] - ys[i]) - 3.0 / h[i - 1] * (ys[i] - ys[i - 1]);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    l[i] = 2.0 * (xs[i + 1] - xs[i - 1]) - h[i - 1] * mu[i - 1];
    mu[i] = h[i] / l[i];
    z[i] = (alpha[i] - h[i - 1] * z[i - 1]) / l[i];
  }
  for (std::size_t j = n - 1; j-- > 0;) c[j] = z[j] - mu[j] * c[j + 1];
  std::size_t seg = 0;
  while (seg + 2 < n && x > xs[seg + 1]) ++seg;
  const double b = (ys[seg + 1] - ys[seg]) / h[seg] - h[seg] * (c[seg + 1] + 2.0 * c[seg]) / 3.0;
  const double d = (c[seg + 1] - c[seg]) / (3.0 * h[seg]);
  const double dx = x - xs[seg];
  return ys[seg] + dx * (b + dx * (c[seg] + dx * d));
}

constexpr std::size_t kSplineSupport = 4;  // valid knots taken on each side of a gap

// Returns false when a gap exceeds max_gap; fills in place otherwise.
bool fill_gaps(std::vector<Vec3>& samples, std::size_t axis, std::size_t max_gap, std::size_t& filled,
               std::string& detail) {
  const std::size_t n = samples.size();
  std::size_t i = 0;
  while (i < n) {
    if (std::isfinite(samples[i][axis])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !std::isfinite(samples[j][axis])) ++j;
    const std::size_t gap = j - i;
    if (gap > max_gap) {
      detail = "gap of " + std::to_string(gap) + " frames at frame " + std::to_string(i);
      return false;
    }
    std::vector<double> xs, ys;
    for (std::size_t k = i, taken = 0; k-- > 0 && taken < kSplineSupport;) {
      if (std::isfinite(samples[k][axis])) {
        xs.insert(xs.begin(), static_cast<double>(k));
        ys.insert(ys.begin(), samples[k][axis]);
        ++taken;
      }
    }
    for (std::size_t k = j, taken = 0; k < n && taken < kSplineSupport; ++k) {
      if (std::isfinite(samples[k][axis])) {
        xs.push_back(static_cast<double>(k));
        ys.push_back(samples[k][axis]);
        ++taken;
      }
    }
    if (xs.empty()) {
      detail = "track has no valid samples";
      return false;
    }
    for (std::size_t k = i; k < j; ++k) {
      double v;
      if (static_cast<double>(k) < xs.front()) v = ys.front();
      else if (static_cast<double>(k) > xs.back()) v = ys.back();
      else v = natural_spline(xs, ys, static_cast<double>(k));
      samples[k][axis] = v;
      ++filled;
    }
    i = j;
  }
  return true;
}

}  // namespace

GateResult quality_gate(const TrialRecord& trial, const GateConfig& cfg) {
  GateResult result;
  for (const auto& s : trial.sensors) {
    if (s.size() < 3) {
      result.reason = RejectReason::DurationTooShort;
      result.detail = std::string(to_string(s.location)) + " has fewer than 3 frames";
      return result;
    }
  }
  if (trial.force && trial.force->size() < 2 * cfg.contact.min_contact_frames) {
    result.reason = RejectReason::DurationTooShort;
    result.detail = "force track shorter than two contact runs";
    return result;
  }

  TrialRecord out = trial;
  for (auto& s : out.sensors) {
    for (std::size_t axis = 0; axis < 3; ++axis) {
      std::string detail;
      if (!fill_gaps(s.samples, axis, cfg.max_gap_frames, result.filled_frames, detail)) {
        result.reason = RejectReason::GapTooLong;
        result.detail = std::string(to_string(s.location)) + ": " + detail;
        return result;
      }
    }
  }

  if (trial.force) {
    try {
      (void)gait::detect_stance_events(*trial.force, cfg.contact);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoContact) throw;
      result.reason = RejectReason::NoContact;
      result.detail = "vertical force never exceeds the contact threshold";
      return result;
    }
  }
  result.accepted = std::move(out);
  return result;
}

std::string content_hash(const TrialRecord& trial) {
  io::ByteWriter w;
  for (auto loc : kSensorOrder) {
    const SensorTrack* s = trial.find(loc);
    if (!s) {
      w.put_u32(0xFFFFFFFFu);
      continue;
    }
    w.put_u32(static_cast<std::uint32_t>(loc));
    w.put_u32(static_cast<std::uint32_t>(s->kind));
    w.put_f64(s->rate_hz);
    w.put_u64(s->size());
    for (const auto& v : s->samples) {
      w.put_f64(v.x);
      w.put_f64(v.y);
      w.put_f64(v.z);
    }
  }
  if (trial.force) {
    w.put_f64(trial.force->rate_hz);
    w.put_u64(trial.force->size());
    for (const auto& row : trial.force->channels) {
      for (double v : row) w.put_f64(v);
    }
  } else {
    w.put_u64(0);
  }
  return io::sha256_hex(w.bytes());
}

std::vector<TrialRecord> dedupe(std::vector<TrialRecord> trials) {
  std::set<std::string> seen;
  std::vector<TrialRecord> out;
  out.reserve(trials.size());
  for (auto& t : trials) {
    if (seen.insert(content_hash(t)).second) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace accel2grf::ingest
