#include "accel2grf/error.hpp"
#include "accel2grf/ingest.hpp"
#include "accel2grf/io.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <numbers>

using namespace accel2grf;
using testing::TempDir;

namespace {

SensorTrack make_track(double rate, std::size_t n, double (*f)(double)) {
  SensorTrack t;
  t.rate_hz = rate;
  t.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) / rate;
    t.samples[i] = {f(time), 2.0 * f(time), -f(time)};
  }
  return t;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an accel2grf::Error");
  return ErrorCode::InvalidArgument;
}

void rewrite_manifest(const std::filesystem::path& dir, auto&& edit) {
  auto j = nlohmann::json::parse(io::read_text(dir / ingest::kManifestName));
  edit(j);
  io::write_text(dir / ingest::kManifestName, j.dump(2));
}

}  // namespace

TEST_CASE("parse_trial reads a complete accelerometer trial") {
  TempDir tmp("ingest_parse");
  auto spec = testing::accel_spec();
  spec.accel_hz = 1000.0;
  spec.force_hz = 2000.0;
  const auto trial = simulate::generate_synthetic_trial(spec, 0);
  ingest::write_trial(trial, tmp / "t0");

  const auto parsed = ingest::parse_trial(tmp / "t0");
  CHECK(parsed.sensors.size() == 5);
  REQUIRE(parsed.force.has_value());
  CHECK(parsed.sensors.front().rate_hz == 1000.0);
  CHECK(parsed.force->rate_hz == 2000.0);
  for (std::size_t i = 0; i < 5; ++i) CHECK(parsed.sensors[i].location == kSensorOrder[i]);

  // write/parse round trip is bit exact
  CHECK(parsed.sensors == trial.sensors);
  CHECK(*parsed.force == *trial.force);
  CHECK(parsed.oracle == trial.oracle);
  CHECK(parsed.subject == trial.subject);
}

TEST_CASE("parse_trial rejects broken inputs") {
  TempDir tmp("ingest_broken");
  const auto trial = simulate::generate_synthetic_trial(testing::accel_spec(), 0);

  SUBCASE("four sensors is an incomplete topology") {
    ingest::write_trial(trial, tmp / "t");
    rewrite_manifest(tmp / "t", [](auto& j) { j["sensors"].erase(j["sensors"].begin() + 2); });
    CHECK(code_of([&] { ingest::parse_trial(tmp / "t"); }) == ErrorCode::MissingFile);
  }
  SUBCASE("NaN text in a sample column") {
    ingest::write_trial(trial, tmp / "t");
    const auto file = tmp / "t" / "lshank.csv";
    auto text = io::read_text(file);
    const auto row = text.find('\n', text.find('\n') + 1) + 1;  // third line
    const auto c1 = text.find(',', row);
    const auto c2 = text.find(',', c1 + 1);
    text.replace(c1 + 1, c2 - c1 - 1, "NaN");
    io::write_text(file, text);
    try {
      ingest::parse_trial(tmp / "t");
      FAIL("expected MalformedCsv");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCsv);
      CHECK(std::string(e.what()).find("lshank.csv:3") != std::string::npos);
    }
  }
  SUBCASE("unknown sensor name") {
    ingest::write_trial(trial, tmp / "t");
    rewrite_manifest(tmp / "t", [](auto& j) { j["sensors"][0]["location"] = "LeftEar"; });
    CHECK(code_of([&] { ingest::parse_trial(tmp / "t"); }) == ErrorCode::UnknownSensorName);
  }
  SUBCASE("unsupported unit") {
    ingest::write_trial(trial, tmp / "t");
    rewrite_manifest(tmp / "t", [](auto& j) { j["sensors"][1]["units"] = "furlong/s^2"; });
    CHECK(code_of([&] { ingest::parse_trial(tmp / "t"); }) == ErrorCode::UnitError);
  }
  SUBCASE("missing directory") {
    CHECK(code_of([&] { ingest::parse_trial(tmp / "nope"); }) == ErrorCode::MissingFile);
  }
}

TEST_CASE("parse_trial converts units, aliases and axis order") {
  TempDir tmp("ingest_units");
  const auto trial = simulate::generate_synthetic_trial(testing::accel_spec(), 0);
  ingest::write_trial(trial, tmp / "t");
  // Re-express the pelvis file in g with (z, x, y) column order under its marker alias.
  const auto& pelvis = *trial.find(SensorLocation::Pelvis);
  std::string text = "t,x,y,z\n";
  for (std::size_t i = 0; i < pelvis.size(); ++i) {
    const auto& v = pelvis.samples[i];
    text += io::format_double(pelvis.t0_s + static_cast<double>(i) / pelvis.rate_hz) + "," +
            io::format_double(v.z / 9.81) + "," + io::format_double(v.x / 9.81) + "," + io::format_double(v.y / 9.81) +
            "\n";
  }
  io::write_text(tmp / "t" / "pelvis.csv", text);
  rewrite_manifest(tmp / "t", [](auto& j) {
    for (auto& s : j["sensors"]) {
      if (s["location"] == "Pelvis") {
        s["location"] = "SACR";
        s["units"] = "g";
        s["axis_order"] = "zxy";
      }
    }
  });
  const auto parsed = ingest::parse_trial(tmp / "t");
  const auto& p = *parsed.find(SensorLocation::Pelvis);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p.samples[i].x == doctest::Approx(pelvis.samples[i].x).epsilon(1e-12));
    CHECK(p.samples[i].y == doctest::Approx(pelvis.samples[i].y).epsilon(1e-12));
    CHECK(p.samples[i].z == doctest::Approx(pelvis.samples[i].z).epsilon(1e-12));
  }
}

TEST_CASE("resample_uniform") {
  SUBCASE("integer decimation reproduces every 4th sample") {
    const auto t = make_track(1000.0, 1001, [](double x) { return std::sin(7.0 * x) + x * x; });
    const auto r = ingest::resample_uniform(t, 250.0);
    REQUIRE(r.size() == 251);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.samples[i] == t.samples[4 * i]);
  }
  SUBCASE("linear ramp is exact") {
    const auto t = make_track(1000.0, 1001, [](double x) { return x; });
    const auto r = ingest::resample_uniform(t, 300.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(std::abs(r.samples[i].x - static_cast<double>(i) / 300.0) <= 1e-12);
    }
  }
  SUBCASE("sine stays within the linear interpolation bound") {
    constexpr double w = 2.0 * std::numbers::pi * 2.0;
    const auto t = make_track(1000.0, 1001, [](double x) { return std::sin(w * x); });
    const auto r = ingest::resample_uniform(t, 300.0);  // grids do not align, so real interpolation happens
    const double h = 1.0 / 1000.0;
    const double bound = h * h / 8.0 * w * w;
    double worst = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      worst = std::max(worst, std::abs(r.samples[i].x - std::sin(w * static_cast<double>(i) / 300.0)));
    }
    CHECK(worst > 0.0);
    CHECK(worst <= bound);
  }
  SUBCASE("equal rate is the identity") {
    const auto t = make_track(500.0, 200, [](double x) { return std::cos(3.0 * x); });
    CHECK(ingest::resample_uniform(t, 500.0).samples == t.samples);
  }
  SUBCASE("first sample and time origin are preserved") {
    auto t = make_track(1000.0, 100, [](double x) { return 1.0 + x; });
    t.t0_s = 0.125;
    const auto r = ingest::resample_uniform(t, 333.0);
    CHECK(r.samples.front() == t.samples.front());
    CHECK(r.t0_s == 0.125);
  }
  SUBCASE("upsampling is refused") {
    const auto t = make_track(250.0, 100, [](double x) { return x; });
    CHECK(code_of([&] { ingest::resample_uniform(t, 1000.0); }) == ErrorCode::UpsampleRequested);
  }
}

TEST_CASE("quality_gate") {
  const auto trial = simulate::generate_synthetic_trial(testing::accel_spec(), 0);

  SUBCASE("short gap is spline filled and nothing else changes") {
    auto gappy = trial;
    auto& s = gappy.sensors[3].samples;
    for (std::size_t i = 300; i < 303; ++i) s[i] = {NAN, NAN, NAN};
    const auto r = ingest::quality_gate(gappy);
    REQUIRE(r.ok());
    CHECK(r.filled_frames > 0);
    for (const auto& track : r.accepted->sensors) {
      for (const auto& v : track.samples) CHECK(v.finite());
    }
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (k == 3 && i >= 300 && i < 303) continue;
        CHECK(r.accepted->sensors[k].samples[i] == trial.sensors[k].samples[i]);
      }
    }
    // filled values stay near the smooth original
    for (std::size_t i = 300; i < 303; ++i) {
      CHECK(std::abs(r.accepted->sensors[3].samples[i].y - trial.sensors[3].samples[i].y) < 1.0);
    }
  }
  SUBCASE("long gap is rejected") {
    auto gappy = trial;
    for (std::size_t i = 100; i < 150; ++i) gappy.sensors[1].samples[i].x = NAN;
    ingest::GateConfig cfg;
    cfg.max_gap_frames = 10;
    const auto r = ingest::quality_gate(gappy, cfg);
    CHECK_FALSE(r.ok());
    CHECK(r.reason == ingest::RejectReason::GapTooLong);
  }
  SUBCASE("no contact") {
    auto flat = trial;
    for (auto& row : flat.force->channels) row = Wrench{};
    const auto r = ingest::quality_gate(flat);
    CHECK(r.reason == ingest::RejectReason::NoContact);
  }
  SUBCASE("too short") {
    auto tiny = trial;
    tiny.sensors[0].samples.resize(2);
    CHECK(ingest::quality_gate(tiny).reason == ingest::RejectReason::DurationTooShort);
  }
}

TEST_CASE("dedupe") {
  const auto a = simulate::generate_synthetic_trial(testing::accel_spec(), 0);
  const auto b = simulate::generate_synthetic_trial(testing::accel_spec(), 1);
  auto a_copy = a;
  a_copy.trial_id = "copy";

  const auto out = ingest::dedupe({a, a_copy, b});
  REQUIRE(out.size() == 2);
  CHECK(out[0].trial_id == a.trial_id);
  CHECK(out[1].trial_id == b.trial_id);
  CHECK(ingest::dedupe({a, b}).size() == 2);
  CHECK(ingest::dedupe(out) == out);

  auto nudged = a;
  nudged.sensors[2].samples[10].z += 1e-9;
  CHECK(ingest::dedupe({a, nudged}).size() == 2);
  CHECK(ingest::content_hash(a) == ingest::content_hash(a_copy));
}
