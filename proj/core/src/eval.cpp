#include "accel2grf/eval.hpp"

#include "accel2grf/error.hpp"
#include "accel2grf/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace accel2grf::eval {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b || a == 0) throw Error(ErrorCode::ShapeMismatch, "prediction and truth lengths differ or are empty");
}

void check_sets(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  if (channel >= kForceChannels) throw Error(ErrorCode::InvalidArgument, "channel index out of range");
  check_pair(pred.size(), truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i) check_pair(pred[i][channel].size(), truth[i][channel].size());
}

std::vector<double> pooled(const WaveformSet& set, std::size_t channel) {
  std::vector<double> out;
  for (const auto& w : set) out.insert(out.end(), w[channel].begin(), w[channel].end());
  return out;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double pearson_r(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred.size(), truth.size());
  const double mp = mean_of(pred);
  const double mt = mean_of(truth);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double a = pred[i] - mp;
    const double b = truth[i] - mt;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::ZeroVariance, "correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_r(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  check_sets(pred, truth, channel);
  return pearson_r(pooled(pred, channel), pooled(truth, channel));
}

std::optional<double> per_trial_mean_r(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  check_sets(pred, truth, channel);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    try {
      sum += pearson_r(pred[i][channel], truth[i][channel]);
      ++n;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double rrmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred.size(), truth.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sq += d * d;
  }
  const auto [pmin, pmax] = std::minmax_element(pred.begin(), pred.end());
  const auto [tmin, tmax] = std::minmax_element(truth.begin(), truth.end());
  const double range = 0.5 * ((*pmax - *pmin) + (*tmax - *tmin));
  if (!(range > 0.0)) throw Error(ErrorCode::ZeroRange, "rRMSE undefined: both signals are constant");
  return 100.0 * std::sqrt(sq / static_cast<double>(pred.size())) / range;
}

double rrmse(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  check_sets(pred, truth, channel);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += rrmse(pred[i][channel], truth[i][channel]);
  return sum / static_cast<double>(pred.size());
}

namespace {

BlandAltman summarize(std::vector<BlandAltmanPoint> points) {
  BlandAltman ba;
  double sum = 0.0;
  for (const auto& p : points) sum += p.diff;
  ba.bias = sum / static_cast<double>(points.size());
  double ss = 0.0;
  for (const auto& p : points) ss += (p.diff - ba.bias) * (p.diff - ba.bias);
  ba.sd = points.size() > 1 ? std::sqrt(ss / static_cast<double>(points.size() - 1)) : 0.0;
  ba.loa_low = ba.bias - 1.96 * ba.sd;
  ba.loa_high = ba.bias + 1.96 * ba.sd;
  ba.points = std::move(points);
  return ba;
}

}  // namespace

BlandAltman bland_altman(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred.size(), truth.size());
  std::vector<BlandAltmanPoint> points;
  points.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    points.push_back({0.5 * (pred[i] + truth[i]), pred[i] - truth[i], i});
  }
  return summarize(std::move(points));
}

BlandAltman bland_altman(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  check_sets(pred, truth, channel);
  std::vector<BlandAltmanPoint> points;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const auto& p = pred[t][channel];
    const auto& q = truth[t][channel];
    for (std::size_t i = 0; i < p.size(); ++i) points.push_back({0.5 * (p[i] + q[i]), p[i] - q[i], i});
  }
  return summarize(std::move(points));
}

ChannelStats channel_stats(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  ChannelStats s;
  s.channel = channel;
  try {
    s.r = pearson_r(pred, truth, channel);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
  }
  s.r_trial_mean = per_trial_mean_r(pred, truth, channel);
  try {
    s.rrmse_pct = rrmse(pred, truth, channel);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroRange) throw;
  }
  const auto ba = bland_altman(pred, truth, channel);
  s.bias = ba.bias;
  s.loa_low = ba.loa_low;
  s.loa_high = ba.loa_high;
  return s;
}

EvalReport build_report(const ExperimentMeta& meta, const std::array<ChannelStats, kForceChannels>& stats) {
  EvalReport rep;
  rep.meta = meta;
  rep.channels = stats;
  auto mean3 = [&](std::size_t first) -> std::optional<double> {
    double sum = 0.0;
    for (std::size_t c = first; c < first + 3; ++c) {
      if (!stats[c].r) return std::nullopt;
      sum += *stats[c].r;
    }
    return sum / 3.0;
  };
  rep.f_mean_r = mean3(kFx);
  rep.m_mean_r = mean3(kMx);
  return rep;
}

std::vector<OverlayRow> overlay(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel) {
  check_sets(pred, truth, channel);
  const std::size_t n = truth.front()[channel].size();
  std::vector<OverlayRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = rows[i];
    row.stance_pct = n > 1 ? 100.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    row.truth_min = row.pred_min = INFINITY;
    row.truth_max = row.pred_max = -INFINITY;
    double st = 0.0, sp = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double a = truth[t][channel].at(i);
      const double b = pred[t][channel].at(i);
      row.truth_min = std::min(row.truth_min, a);
      row.truth_max = std::max(row.truth_max, a);
      row.pred_min = std::min(row.pred_min, b);
      row.pred_max = std::max(row.pred_max, b);
      st += a;
      sp += b;
    }
    row.truth_mean = st / static_cast<double>(truth.size());
    row.pred_mean = sp / static_cast<double>(pred.size());
  }
  return rows;
}

Evaluation evaluate(const ExperimentMeta& meta, const WaveformSet& pred, const WaveformSet& truth) {
  Evaluation ev;
  std::array<ChannelStats, kForceChannels> stats{};
  for (std::size_t c = 0; c < kForceChannels; ++c) {
    stats[c] = channel_stats(pred, truth, c);
    ev.overlays[c] = overlay(pred, truth, c);
    ev.bland_altman[c] = bland_altman(pred, truth, c);
  }
  ev.report = build_report(meta, stats);
  return ev;
}

// ---------------------------------------------------------------------------

namespace {

std::string opt(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

std::optional<double> parse_opt(std::string_view field) {
  if (field.empty()) return std::nullopt;
  auto v = io::parse_double(field);
  if (!v) throw Error(ErrorCode::IoError, "bad number in report: " + std::string(field));
  return v;
}

std::string header() {
  std::string h = "experiment,movement,stance_limb,alignment,n_train,n_test";
  for (auto name : kForceChannelNames) h += ",r_" + std::string(name);
  h += ",r_F_mean,r_M_mean";
  for (auto name : kForceChannelNames) h += ",rrmse_" + std::string(name);
  for (auto name : kForceChannelNames) h += ",r_trial_mean_" + std::string(name);
  for (auto name : kForceChannelNames) {
    h += ",ba_bias_" + std::string(name) + ",ba_loa_low_" + std::string(name) + ",ba_loa_high_" + std::string(name);
  }
  h += ",flags";
  return h;
}

std::string flags(const EvalReport& rep) {
  std::string out;
  for (const auto& c : rep.channels) {
    const std::string name(kForceChannelNames[c.channel]);
    if (!c.r) out += (out.empty() ? "" : ";") + name + ":zero_variance";
    if (!c.rrmse_pct) out += (out.empty() ? "" : ";") + name + ":zero_range";
  }
  return out;
}

void write_csv(const fs::path& path, const std::string& head, const std::vector<std::vector<double>>& rows) {
  std::string text = head + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + io::format_double(row[i]);
    text += "\n";
  }
  io::write_text(path, text);
}

std::string svg_overlay(const std::vector<OverlayRow>& rows, std::string_view channel) {
  constexpr double kW = 480, kH = 300, kPad = 30;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : rows) {
    lo = std::min({lo, r.truth_min, r.pred_min});
    hi = std::max({hi, r.truth_max, r.pred_max});
  }
  if (!(hi > lo)) hi = lo + 1.0;
  auto px = [&](double pct) { return kPad + (kW - 2 * kPad) * pct / 100.0; };
  auto py = [&](double v) { return kH - kPad - (kH - 2 * kPad) * (v - lo) / (hi - lo); };
  auto line = [&](auto member, const char* colour, const char* dash) {
    std::ostringstream s;
    s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-dasharray=\"" << dash << "\" points=\"";
    for (const auto& r : rows) s << io::format_double(px(r.stance_pct)) << "," << io::format_double(py(r.*member)) << " ";
    s << "\"/>\n";
    return s.str();
  };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<text x=\"" << kPad << "\" y=\"18\" font-size=\"13\">" << channel << " (truth blue, prediction red)</text>\n";
  out << line(&OverlayRow::truth_mean, "blue", "none") << line(&OverlayRow::truth_min, "blue", "2,3")
      << line(&OverlayRow::truth_max, "blue", "2,3") << line(&OverlayRow::pred_mean, "red", "none")
      << line(&OverlayRow::pred_min, "red", "2,3") << line(&OverlayRow::pred_max, "red", "2,3");
  out << "</svg>\n";
  return out.str();
}

}  // namespace

void write_report_csv(const std::vector<EvalReport>& rows, const fs::path& path) {
  std::string text = header() + "\n";
  for (const auto& rep : rows) {
    const auto& m = rep.meta;
    text += m.experiment_id + "," + m.movement + "," + m.stance_limb + "," + m.alignment + "," +
            std::to_string(m.n_train) + "," + std::to_string(m.n_test);
    for (const auto& c : rep.channels) text += "," + opt(c.r);
    text += "," + opt(rep.f_mean_r) + "," + opt(rep.m_mean_r);
    for (const auto& c : rep.channels) text += "," + opt(c.rrmse_pct);
    for (const auto& c : rep.channels) text += "," + opt(c.r_trial_mean);
    for (const auto& c : rep.channels) {
      text += "," + io::format_double(c.bias) + "," + io::format_double(c.loa_low) + "," + io::format_double(c.loa_high);
    }
    text += "," + flags(rep) + "\n";
  }
  io::write_text(path, text);
}

std::vector<EvalReport> read_report_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != header()) throw Error(ErrorCode::IoError, path.string() + ": unexpected report header");
  std::vector<EvalReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    const std::size_t expected = 6 + 6 + 2 + 6 + 6 + 18 + 1;
    if (f.size() != expected) throw Error(ErrorCode::IoError, path.string() + ": wrong field count");
    EvalReport rep;
    rep.meta = {std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3]),
                static_cast<std::size_t>(std::stoull(std::string(f[4]))),
                static_cast<std::size_t>(std::stoull(std::string(f[5])))};
    std::size_t i = 6;
    for (std::size_t c = 0; c < kForceChannels; ++c) {
      rep.channels[c].channel = c;
      rep.channels[c].r = parse_opt(f[i++]);
    }
    rep.f_mean_r = parse_opt(f[i++]);
    rep.m_mean_r = parse_opt(f[i++]);
    for (auto& c : rep.channels) c.rrmse_pct = parse_opt(f[i++]);
    for (auto& c : rep.channels) c.r_trial_mean = parse_opt(f[i++]);
    for (auto& c : rep.channels) {
      c.bias = parse_opt(f[i++]).value_or(0.0);
      c.loa_low = parse_opt(f[i++]).value_or(0.0);
      c.loa_high = parse_opt(f[i++]).value_or(0.0);
    }
    out.push_back(rep);
  }
  return out;
}

void emit_report(const Evaluation& evaluation, const fs::path& out_dir, bool svg) {
  io::ensure_directory(out_dir);
  write_report_csv({evaluation.report}, out_dir / "report.csv");
  for (std::size_t c = 0; c < kForceChannels; ++c) {
    const std::string name(kForceChannelNames[c]);
    std::vector<std::vector<double>> rows;
    for (const auto& r : evaluation.overlays[c]) {
      rows.push_back({r.stance_pct, r.truth_min, r.truth_mean, r.truth_max, r.pred_min, r.pred_mean, r.pred_max});
    }
    write_csv(out_dir / ("overlay_" + name + ".csv"),
              "stance_pct,truth_min,truth_mean,truth_max,pred_min,pred_mean,pred_max", rows);
    rows.clear();
    for (const auto& p : evaluation.bland_altman[c].points) {
      rows.push_back({p.mean, p.diff, static_cast<double>(p.time_index)});
    }
    write_csv(out_dir / ("bland_altman_" + name + ".csv"), "pair_mean,difference,time_index", rows);
    if (svg) io::write_text(out_dir / ("overlay_" + name + ".svg"), svg_overlay(evaluation.overlays[c], name));
  }
}

}  // namespace accel2grf::eval
