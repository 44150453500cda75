// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "accel2grf/align.hpp"
#include "accel2grf/config.hpp"
#include "accel2grf/encode.hpp"
#include "accel2grf/error.hpp"
#include "accel2grf/eval.hpp"
#include "accel2grf/gait.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/model.hpp"
#include "accel2grf/pipeline.hpp"
#include "accel2grf/rng.hpp"
#include "accel2grf/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

using namespace accel2grf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

align::RotationMatrix3 random_rotation(Rng& rng) {
  Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
  while (axis.norm() < 1e-6) axis = {rng.normal(), rng.normal(), rng.normal()};
  return align::RotationMatrix3::axis_angle(axis, rng.uniform(0.0, std::numbers::pi));
}

// --- 1 ----------------------------------------------------------------------

Outcome differentiation() {
  simulate::VirtualImuConfig cfg;
  cfg.include_gravity = false;
  SensorTrack quad;
  quad.kind = TrackKind::Position;
  quad.rate_hz = 250.0;
  for (std::size_t i = 0; i < 26; ++i) {
    const double t = static_cast<double>(i) / 250.0;
    quad.samples.push_back({0.0, 0.0, t * t});
  }
  double quad_err = 0.0;
  for (const auto& v : simulate::double_differentiate(quad, cfg).samples) quad_err = std::max(quad_err, std::abs(v.z - 2.0));

  constexpr double w = 2.0 * std::numbers::pi * 2.0;
  const double h = 1.0 / 250.0;
  SensorTrack sine = quad;
  sine.samples.clear();
  for (std::size_t i = 0; i < 251; ++i) sine.samples.push_back({0.0, std::sin(w * static_cast<double>(i) * h), 0.0});
  const auto a = simulate::double_differentiate(sine, cfg);
  double rel = 0.0;
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    rel = std::max(rel, std::abs(a.samples[i].y + w * w * std::sin(w * static_cast<double>(i) * h)) / (w * w));
  }
  const double bound = h * h / 12.0 * w * w;
  return {quad_err <= 1e-12 && rel <= bound,
          "quadratic max err " + fmt(quad_err) + ", sine rel err " + fmt(rel) + " <= bound " + fmt(bound)};
}

// --- 2 ----------------------------------------------------------------------

Outcome alignment() {
  Rng rng(2, 0);
  double norm_err = 0.0, ortho_err = 0.0, det_err = 0.0, min_dot = 1.0;
  for (std::size_t c = 0; c < 1000; ++c) {
    SensorTrack lab;
    lab.rate_hz = 250.0;
    const double amp_y = rng.uniform(3.0, 5.0), amp_x = rng.uniform(1.2, 2.0), amp_z = rng.uniform(0.2, 0.6);
    const double fy = rng.uniform(4.0, 8.0), fx = rng.uniform(9.0, 13.0), fz = rng.uniform(15.0, 20.0);
    for (std::size_t i = 0; i < 300; ++i) {
      const double s = static_cast<double>(i) / 250.0;
      lab.samples.push_back({amp_x * std::sin(fx * s), amp_y * std::sin(fy * s) + 0.8, 9.81 + amp_z * std::cos(fz * s)});
    }
    const auto mount = random_rotation(rng);
    const auto sensor = align::rotate(lab, mount.transposed());

    const auto n_lab = align::euclidean_norm_align(lab);
    const auto n_sensor = align::euclidean_norm_align(sensor);
    for (std::size_t i = 0; i < lab.size(); ++i) norm_err = std::max(norm_err, std::abs(n_lab.samples[i].x - n_sensor.samples[i].x));

    const auto p_sensor = align::pca_rotation_matrix(sensor);
    const auto p_lab = align::pca_rotation_matrix(lab);
    ortho_err = std::max({ortho_err, p_sensor.orthonormality_error(), p_lab.orthonormality_error()});
    det_err = std::max({det_err, std::abs(p_sensor.determinant() - 1.0), std::abs(p_lab.determinant() - 1.0)});
    const auto expected = p_lab * mount;
    for (std::size_t r = 0; r < 3; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 3; ++k) dot += p_sensor.m[r][k] * expected.m[r][k];
      min_dot = std::min(min_dot, dot);
    }
  }
  return {norm_err <= 1e-12 && ortho_err <= 1e-9 && det_err <= 1e-9 && min_dot >= 1.0 - 1e-6,
          "1000 cases: NORM err " + fmt(norm_err) + ", orthonormality " + fmt(ortho_err) + ", |det-1| " +
              fmt(det_err) + ", min axis dot " + fmt(min_dot, 12)};
}

// --- 3 ----------------------------------------------------------------------

Outcome gait_suite() {
  ForceTrack rect;
  rect.rate_hz = 2000.0;
  rect.channels.assign(2000, Wrench{});
  for (std::size_t i = 700; i < 1200; ++i) rect.channels[i][kFz] = 1500.0;
  const auto rw = gait::detect_stance_events(rect);
  const bool rect_ok = rw.fs_frame == 700 && rw.to_frame == 1200;

  int worst = 0;
  std::size_t mirrored = 0;
  bool mirror_ok = true, endpoints_ok = true;
  const MovementClass movements[] = {MovementClass::RunSlow, MovementClass::RunModerate, MovementClass::Sidestep,
                                     MovementClass::RunFast};
  const double speeds[] = {2.5, 4.5, 4.0, 6.5};
  for (std::size_t i = 0; i < 100; ++i) {
    simulate::SynthSpec spec;
    spec.seed = 300 + i;
    spec.movement = movements[i % 4];
    spec.speed_mps = speeds[i % 4];
    spec.stance_ms = 180.0 + static_cast<double>(i % 7) * 20.0;
    spec.source_kind = i % 2 ? SourceKind::Accelerometers : SourceKind::Markers;
    auto t = simulate::generate_synthetic_trial(spec, i);
    t.stance_limb = t.oracle->stance_limb;
    const auto w = gait::detect_stance_events(*t.force);
    worst = std::max({worst, std::abs(static_cast<int>(w.fs_frame) - t.oracle->fs_frame),
                      std::abs(static_cast<int>(w.to_frame) - t.oracle->to_frame)});
    if (t.stance_limb == Limb::Left) {
      mirror_ok = mirror_ok && gait::mirror_left_to_right(gait::mirror_left_to_right(t)) == t;
      ++mirrored;
    }
    const auto n = gait::normalize_stance(*t.force, w);
    endpoints_ok = endpoints_ok && n.front() == t.force->channels[w.fs_frame] && n.back() == t.force->channels[w.to_frame];
  }
  mirror_ok = mirror_ok && mirrored > 0;
  return {rect_ok && worst <= 2 && mirror_ok && endpoints_ok,
          std::string("rectangle ") + (rect_ok ? "exact" : "off") + ", worst oracle offset " + std::to_string(worst) +
              " frames over 100 trials, mirror involution " + (mirror_ok ? "exact" : "broken") + " on " +
              std::to_string(mirrored) + " left trials" + ", endpoints " +
              (endpoints_ok ? "exact" : "off")};
}

// --- 4 ----------------------------------------------------------------------

Outcome encode_round_trip() {
  Rng rng(4, 0);
  double worst_ratio = 0.0;
  bool gray = true, degenerate = true;
  for (std::size_t c = 0; c < 1000; ++c) {
    encode::RealGrid g;
    g.rows = 101;
    g.cols = 5;
    const double lo = rng.uniform(-200.0, 0.0), hi = lo + rng.uniform(1e-3, 300.0);
    for (std::size_t i = 0; i < g.rows * g.cols; ++i) {
      g.values.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
    }
    const auto q = encode::quantize_grid(g);
    const auto back = encode::decode_image_grid(q.grid, q.scaling);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double half = (q.scaling.channels[ch].max - q.scaling.channels[ch].min) / 510.0;
      for (std::size_t i = 0; i < g.values.size(); ++i) {
        worst_ratio = std::max(worst_ratio, std::abs(back.values[i][ch] - g.values[i][ch]) / half);
      }
    }
    // NORM-style grid: equal channels
    auto m = g;
    for (auto& v : m.values) v = {v.x, v.x, v.x};
    const auto qm = encode::quantize_grid(m);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      gray = gray && qm.grid.pixels[i * 3] == qm.grid.pixels[i * 3 + 1] && qm.grid.pixels[i * 3 + 1] == qm.grid.pixels[i * 3 + 2];
    }
    auto d = g;
    for (auto& v : d.values) v.y = lo;
    const auto qd = encode::quantize_grid(d);
    for (std::size_t i = 0; i < d.values.size(); ++i) degenerate = degenerate && qd.grid.pixels[i * 3 + 1] == 0;
  }
  // and a real NORM-aligned trial through the full image path
  simulate::SynthSpec spec;
  spec.source_kind = SourceKind::Accelerometers;
  spec.mount = simulate::MountPolicy::Random;
  const auto t = simulate::generate_synthetic_trial(spec, 0);
  encode::EncodeOptions o;
  o.size = 64;
  const auto img = encode::encode_image(align::align_trial(t, align::AlignmentMode::Norm).trial,
                                        gait::detect_stance_events(*t.force), o)
                       .image;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    gray = gray && img.pixels[i] == img.pixels[i + 1] && img.pixels[i + 1] == img.pixels[i + 2];
  }
  return {worst_ratio <= 1.0 + 1e-9 && gray && degenerate,
          "1000 grids: worst error " + fmt(worst_ratio) + " half-steps, NORM grayscale " + (gray ? "yes" : "no") +
              ", degenerate -> 0 " + (degenerate ? "yes" : "no")};
}

// --- 5 ----------------------------------------------------------------------

Outcome output_pca() {
  Rng rng(5, 0);
  std::vector<std::vector<double>> x(30, std::vector<double>(6 * 101));
  for (auto& row : x) {
    for (auto& v : row) v = rng.normal();
  }
  const auto m = encode::fit_output_pca(x, 1.0);
  double err = 0.0;
  for (const auto& row : x) {
    const auto r = encode::reconstruct_target(m, encode::project_target(m, row));
    for (std::size_t i = 0; i < row.size(); ++i) err = std::max(err, std::abs(r[i] - row[i]));
  }
  // +-s_j e_j with s = 10, 3, 1: cumulative variance 0.909, 0.991, 1
  std::vector<std::vector<double>> y;
  const double s[3] = {10.0, 3.0, 1.0};
  for (std::size_t j = 0; j < 3; ++j) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> row(12, 0.0);
      row[4 * j] = sign * s[j];
      y.push_back(row);
    }
  }
  const std::size_t k90 = encode::fit_output_pca(y, 0.90).k(), k95 = encode::fit_output_pca(y, 0.95).k(),
                    k995 = encode::fit_output_pca(y, 0.995).k();
  return {err <= 1e-9 && m.k() >= 29 && k90 == 1 && k95 == 2 && k995 == 3,
          "full rank K " + std::to_string(m.k()) + " reconstruction err " + fmt(err) + ", constructed K " +
              std::to_string(k90) + "/" + std::to_string(k95) + "/" + std::to_string(k995) + " (expected 1/2/3)"};
}

// --- 6 ----------------------------------------------------------------------

Outcome gradient_check() {
  model::NetworkSpec spec;
  spec.input_size = 8;
  spec.conv1_channels = 3;
  spec.conv2_channels = 4;
  spec.hidden = 6;
  spec.k_outputs = 4;
  Rng rng(6, 0);
  std::vector<encode::Image> images;
  std::vector<std::vector<double>> targets;
  for (std::size_t n = 0; n < 4; ++n) {
    encode::Image img{8, 8, std::vector<std::uint8_t>(8 * 8 * 3)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    images.push_back(img);
    std::vector<double> t(4);
    for (auto& v : t) v = rng.normal();
    targets.push_back(t);
  }
  const auto bundle = model::init_network(spec, 6);
  const auto good = model::grad_check(bundle, images, targets, 1e-3);
  const auto bad = model::grad_check(bundle, images, targets, 1e-3, model::BackwardFault::IgnoreHiddenRelu);
  return {good.max_rel_error <= 1e-4 && bad.max_rel_error > 1e-2,
          std::to_string(good.checked) + " params checked (" + std::to_string(good.skipped_kinks) +
              " kink probes skipped), max rel err " + fmt(good.max_rel_error) + "; corrupted backward " +
              fmt(bad.max_rel_error)};
}

// --- 7 / 10 -----------------------------------------------------------------

json benchmark_config(std::size_t epochs) {
  auto entry = [](const char* movement, double speed, const char* kind, int n) {
    json e{{"movement", movement}, {"speed_mps", speed}, {"source_kind", kind}, {"n_trials", n}};
    if (std::string(kind) == "accelerometers") {
      e["mount"] = "random";
      e["noise_std_mps2"] = 0.5;
    }
    return e;
  };
  return {{"experiment_id", "synthetic_benchmark"},
          {"seed", 2017},
          {"synth",
           {entry("run_slow", 2.8, "markers", 100), entry("run_moderate", 4.0, "markers", 100),
            entry("sidestep", 4.0, "markers", 200), entry("run_slow", 2.8, "accelerometers", 15),
            entry("run_moderate", 4.0, "accelerometers", 15), entry("sidestep", 4.0, "accelerometers", 30)}},
          {"alignment", "pca"},
          {"train", {{"epochs", epochs}}}};
}

fs::path run_benchmark(const fs::path& dir, std::size_t epochs) {
  const auto cfg = config::parse_config(benchmark_config(epochs));
  pipeline::run_synth(cfg, dir / "corpus");
  pipeline::run_prepare(cfg, dir / "corpus", dir / "prepared");
  pipeline::run_train(cfg, dir / "prepared", dir / "model");
  pipeline::run_predict(cfg, dir / "model", dir / "prepared", dir / "predictions");
  pipeline::run_evaluate(cfg, dir / "predictions", dir / "prepared", dir / "evaluation");
  return dir / "evaluation" / "report.csv";
}

constexpr std::size_t kBenchmarkEpochs = 40;

Outcome benchmark(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report_path = run_benchmark(work / "benchmark", kBenchmarkEpochs);
  const double elapsed = seconds_since(t0);
  const auto rows = eval::read_report_csv(report_path);
  const auto& r = rows.at(0);
  const double r_fz = r.channels[kFz].r.value_or(0.0);
  const double f_mean = r.f_mean_r.value_or(0.0);
  const double rrmse_fz = r.channels[kFz].rrmse_pct.value_or(1e9);
  return {r_fz >= 0.90 && f_mean >= 0.80 && rrmse_fz <= 20.0 && elapsed <= 15 * 60,
          "n_train " + std::to_string(r.meta.n_train) + ", n_test " + std::to_string(r.meta.n_test) + ", r(Fz) " +
              fmt(r_fz) + ", r(F_mean) " + fmt(f_mean) + ", rRMSE(Fz) " + fmt(rrmse_fz) + " %, r(Fx) " +
              fmt(r.channels[kFx].r.value_or(0.0)) + ", r(Fy) " + fmt(r.channels[kFy].r.value_or(0.0)) + ", " +
              fmt(elapsed) + " s end to end"};
}

Outcome determinism(const fs::path& work) {
  const auto first = work / "benchmark" / "evaluation" / "report.csv";
  if (!fs::exists(first)) return {false, "criterion 7 output missing"};
  const auto second = run_benchmark(work / "benchmark_rerun", kBenchmarkEpochs);
  const auto a = io::read_bytes(first);
  const auto b = io::read_bytes(second);
  return {a == b, std::string("report.csv ") + (a == b ? "byte-identical" : "differs") + " (" + std::to_string(a.size()) +
                      " bytes, sha256 " + io::sha256_hex(a).substr(0, 16) + ")"};
}

// --- 8 ----------------------------------------------------------------------

Outcome cascade(const fs::path& work) {
  auto entry = [](const char* movement, double speed, const char* kind, int n) {
    return json{{"movement", movement}, {"speed_mps", speed}, {"source_kind", kind}, {"n_trials", n}};
  };
  constexpr std::size_t epochs = 15;
  // parent task: running only
  json parent_cfg = {{"experiment_id", "cascade_parent"},
                     {"seed", 81},
                     {"synth",
                      {entry("run_slow", 2.8, "markers", 80), entry("run_moderate", 4.5, "markers", 80),
                       entry("run_moderate", 4.5, "accelerometers", 10)}},
                     {"train", {{"epochs", epochs}}}};
  // child task: sidestepping, disjoint trials
  json child_cfg = {{"experiment_id", "cascade_child"},
                    {"seed", 82},
                    {"synth", {entry("sidestep", 4.0, "markers", 120), entry("sidestep", 4.0, "accelerometers", 10)}},
                    {"train", {{"epochs", epochs}}}};
  const auto pc = config::parse_config(parent_cfg);
  pipeline::run_synth(pc, work / "cascade" / "parent_corpus");
  pipeline::run_prepare(pc, work / "cascade" / "parent_corpus", work / "cascade" / "parent_prepared");
  pipeline::run_train(pc, work / "cascade" / "parent_prepared", work / "cascade" / "parent_model");

  const auto cc = config::parse_config(child_cfg);
  pipeline::run_synth(cc, work / "cascade" / "child_corpus");
  pipeline::run_prepare(cc, work / "cascade" / "child_corpus", work / "cascade" / "child_prepared");
  const auto cold = pipeline::run_train(cc, work / "cascade" / "child_prepared", work / "cascade" / "cold");
  auto warm_cfg = cc;
  warm_cfg.parent_model = (work / "cascade" / "parent_model").string();
  const auto warm = pipeline::run_train(warm_cfg, work / "cascade" / "child_prepared", work / "cascade" / "warm");

  const double target = cold.history.back().val_loss;
  std::size_t reached = 0;
  for (const auto& h : warm.history) {
    if (h.val_loss <= target) {
      reached = h.epoch;
      break;
    }
  }
  const bool linked = warm.parent_id.has_value();
  return {linked && reached != 0 && reached <= epochs,
          "cold final val loss " + fmt(target) + " after " + std::to_string(epochs) + " epochs; warm start " +
              (reached ? "reaches it at epoch " + std::to_string(reached) : std::string("never reaches it")) +
              " (warm final " + fmt(warm.history.back().val_loss) + ")"};
}

// --- 9 ----------------------------------------------------------------------

Outcome metrics() {
  const std::vector<double> x = {1.0, 2.0, 3.0}, y = {-5.0, 1.0, 4.0};
  const double r_err = std::abs(eval::pearson_r(x, y) - 9.0 / std::sqrt(84.0));
  const std::vector<double> truth = {-1.0, 0.0, 1.0, 0.0}, pred = {-0.8, 0.2, 1.2, 0.2};
  const double rr_err = std::abs(eval::rrmse(pred, truth) - 10.0);
  const std::vector<double> p = {1.0, 2.0, 3.0, 4.0}, t = {0.0, 2.0, 2.0, 6.0};
  const auto ba = eval::bland_altman(p, t);
  const double ba_err = std::max({std::abs(ba.bias), std::abs(ba.sd - std::sqrt(2.0)),
                                  std::abs(ba.loa_high - 1.96 * std::sqrt(2.0)),
                                  std::abs(ba.loa_low + 1.96 * std::sqrt(2.0))});
  return {r_err <= 1e-9 && rr_err <= 1e-9 && ba_err <= 1e-9,
          "pearson err " + fmt(r_err) + ", rRMSE err " + fmt(rr_err) + ", Bland-Altman err " + fmt(ba_err)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accel2grf acceptance suite"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for the end-to-end runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path work_dir = work;
  fs::remove_all(work_dir);
  fs::create_directories(work_dir);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "differentiation oracle", 1.0, differentiation},
      {2, "alignment suite", 10.0, alignment},
      {3, "gait suite", 0.0, gait_suite},
      {4, "encode round trip", 0.0, encode_round_trip},
      {5, "output PCA", 0.0, output_pca},
      {6, "gradient check", 60.0, gradient_check},
      {7, "end-to-end synthetic benchmark", 0.0, [&] { return benchmark(work_dir); }},
      {8, "cascade warm start", 0.0, [&] { return cascade(work_dir); }},
      {9, "metric unit cases", 0.0, metrics},
      {10, "determinism", 0.0, [&] { return determinism(work_dir); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    const double elapsed = seconds_since(t0);
    if (c.budget_s > 0.0 && elapsed > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_s) + " s budget";
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(elapsed, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
