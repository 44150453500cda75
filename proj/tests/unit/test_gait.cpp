#include "accel2grf/error.hpp"
#include "accel2grf/gait.hpp"
#include "accel2grf/simulate.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace accel2grf;

namespace {

ForceTrack rectangle(std::size_t n, std::size_t on, std::size_t off, double level = 800.0) {
  ForceTrack f;
  f.rate_hz = 1000.0;
  f.channels.assign(n, Wrench{});
  for (std::size_t i = on; i < off; ++i) f.channels[i][kFz] = level;
  return f;
}

}  // namespace

TEST_CASE("detect_stance_events") {
  SUBCASE("rectangular pulse gives the exact edges") {
    const auto w = gait::detect_stance_events(rectangle(1000, 200, 450));
    CHECK(w.fs_frame == 200);
    CHECK(w.to_frame == 450);
    CHECK(w.rate_hz == 1000.0);
    CHECK(w.duration_s() == doctest::Approx(0.25));
  }
  SUBCASE("a spike shorter than the minimum contact is ignored") {
    auto f = rectangle(1000, 500, 700);
    for (std::size_t i = 100; i < 105; ++i) f.channels[i][kFz] = 900.0;
    const auto w = gait::detect_stance_events(f);
    CHECK(w.fs_frame == 500);
    CHECK(w.to_frame == 700);
  }
  SUBCASE("no contact") {
    try {
      gait::detect_stance_events(rectangle(500, 0, 0));
      FAIL("expected NoContact");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoContact);
    }
  }
  SUBCASE("generated trials land within two frames of the oracle") {
    for (std::size_t idx = 0; idx < 8; ++idx) {
      const auto t = simulate::generate_synthetic_trial(testing::run_spec(11), idx);
      const auto w = gait::detect_stance_events(*t.force);
      CHECK(std::abs(static_cast<int>(w.fs_frame) - t.oracle->fs_frame) <= 2);
      CHECK(std::abs(static_cast<int>(w.to_frame) - t.oracle->to_frame) <= 2);
    }
  }
}

TEST_CASE("detect_stance_limb matches the generator") {
  for (std::size_t idx = 0; idx < 6; ++idx) {
    const auto t = simulate::generate_synthetic_trial(testing::accel_spec(3), idx);
    const auto d = gait::detect_stance_limb(t, gait::detect_stance_events(*t.force));
    CHECK(d.limb == t.oracle->stance_limb);
    CHECK_FALSE(d.tie);
  }
}

TEST_CASE("mirror_left_to_right") {
  auto spec = testing::accel_spec();
  spec.limb = simulate::LimbPolicy::Left;
  auto left = simulate::generate_synthetic_trial(spec, 0);
  left.stance_limb = Limb::Left;
  const auto m = gait::mirror_left_to_right(left);
  CHECK(m.stance_limb == Limb::Right);
  CHECK(m.mirrored);

  const auto& l_shank = *left.find(SensorLocation::LShank);
  const auto& r_shank = *m.find(SensorLocation::RShank);
  for (std::size_t i = 0; i < l_shank.size(); ++i) {
    CHECK(r_shank.samples[i].x == -l_shank.samples[i].x);
    CHECK(r_shank.samples[i].y == l_shank.samples[i].y);
  }
  const auto& w0 = left.force->channels[left.oracle->fs_frame + 100];
  const auto& w1 = m.force->channels[left.oracle->fs_frame + 100];
  CHECK(w1[kFx] == -w0[kFx]);
  CHECK(w1[kFy] == w0[kFy]);
  CHECK(w1[kFz] == w0[kFz]);
  CHECK(w1[kMx] == w0[kMx]);
  CHECK(w1[kMy] == -w0[kMy]);
  CHECK(w1[kMz] == -w0[kMz]);

  CHECK(gait::mirror_left_to_right(m) == left);

  auto right = simulate::generate_synthetic_trial(testing::accel_spec(), 0);
  right.stance_limb = Limb::Right;
  CHECK_THROWS_AS(gait::mirror_left_to_right(right), Error);
}

TEST_CASE("stance normalization") {
  SUBCASE("endpoints are the exact edge values") {
    const std::vector<double> v = {0.0, 1.0, 4.0, 9.0, 16.0, 25.0, 36.0};
    const auto out = gait::normalize_span(v, 1.0, 5.0, 101);
    REQUIRE(out.size() == 101);
    CHECK(out.front() == 1.0);
    CHECK(out.back() == 25.0);
    CHECK(out[25] == doctest::Approx(4.0));  // position 2.0
  }
  SUBCASE("fractional edges interpolate") {
    const std::vector<double> v = {0.0, 10.0, 20.0, 30.0};
    const auto out = gait::normalize_span(v, 0.5, 2.5, 5);
    CHECK(out.front() == doctest::Approx(5.0));
    CHECK(out.back() == doctest::Approx(25.0));
    CHECK(out[2] == doctest::Approx(15.0));
  }
  SUBCASE("window outside the track") {
    const std::vector<double> v = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(gait::normalize_span(v, 0.0, 3.5, 10), Error);
  }
  SUBCASE("force normalization spans the contact") {
    const auto f = rectangle(1000, 200, 450);
    const auto w = gait::detect_stance_events(f);
    const auto n = gait::normalize_stance(f, w);
    REQUIRE(n.size() == 101);
    CHECK(n.front()[kFz] == 800.0);
    CHECK(n[50][kFz] == 800.0);
  }
  SUBCASE("lead-in start") {
    gait::StanceWindow w;
    w.fs_frame = 400;
    w.to_frame = 900;
    w.rate_hz = 1000.0;
    CHECK(gait::lead_in_start(w, 0.25) == 275);
    CHECK(gait::lead_in_start(w, 1.0) == 0);
    const auto trimmed = gait::trim_lead_in(rectangle(1200, 400, 900), w, 0.25);
    CHECK(trimmed.t0_s == doctest::Approx(0.275));
  }
}

TEST_CASE("classify_movement from pelvis markers") {
  struct Case {
    MovementClass cls;
    double speed;
  };
  for (const auto& c : {Case{MovementClass::RunSlow, 2.5}, Case{MovementClass::RunModerate, 4.5},
                        Case{MovementClass::RunFast, 6.5}, Case{MovementClass::Sidestep, 4.0}}) {
    auto spec = testing::run_spec(21);
    spec.movement = c.cls;
    spec.speed_mps = c.speed;
    for (std::size_t idx = 0; idx < 4; ++idx) {
      const auto t = simulate::generate_synthetic_trial(spec, idx);
      const auto w = gait::detect_stance_events(*t.force);
      const auto label = gait::classify_movement(t, w);
      CAPTURE(to_string(c.cls));
      CHECK(label.cls == c.cls);
      if (c.cls != MovementClass::Sidestep) CHECK(label.trend == gait::SpeedTrend::Steady);
      CHECK(std::abs(label.mean_speed_mps - c.speed) < 0.5);
    }
  }
  SUBCASE("speed trends") {
    auto spec = testing::run_spec(5);
    spec.speed_mps = 4.5;
    spec.movement = MovementClass::RunAccel;
    const auto a = simulate::generate_synthetic_trial(spec, 0);
    CHECK(gait::classify_movement(a, gait::detect_stance_events(*a.force)).trend == gait::SpeedTrend::Accel);
    spec.movement = MovementClass::RunDecel;
    const auto d = simulate::generate_synthetic_trial(spec, 0);
    CHECK(gait::classify_movement(d, gait::detect_stance_events(*d.force)).trend == gait::SpeedTrend::Decel);
  }
  SUBCASE("walking pace is not a run") {
    auto spec = testing::run_spec(5);
    spec.movement = MovementClass::Other;
    spec.speed_mps = 1.4;
    const auto t = simulate::generate_synthetic_trial(spec, 0);
    CHECK(gait::classify_movement(t, gait::detect_stance_events(*t.force)).cls == MovementClass::Other);
  }
  SUBCASE("accelerometer trials use the manifest label") {
    auto spec = testing::accel_spec();
    spec.movement = MovementClass::Sidestep;
    spec.speed_mps = 4.0;
    const auto t = simulate::generate_synthetic_trial(spec, 0);
    const auto label = gait::classify_movement(t, std::nullopt);
    CHECK(label.from_manifest);
    CHECK(label.cls == MovementClass::Sidestep);
  }
  CHECK(gait::speed_bin(3.2, true) == MovementClass::Other);
  CHECK(gait::speed_bin(3.2, false) == MovementClass::RunSlow);
}
