#include "accel2grf/error.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <map>

using namespace accel2grf;
using nlohmann::json;
using testing::TempDir;

namespace {

json small_config() {
  auto entry = [](const char* movement, double speed, const char* kind, int n) {
    return json{{"movement", movement}, {"speed_mps", speed}, {"source_kind", kind}, {"n_trials", n},
                {"noise_std_mps2", 0.2}};
  };
  return {
      {"experiment_id", "small"},
      {"seed", 5},
      {"synth",
       {entry("run_moderate", 4.0, "markers", 6), entry("sidestep", 4.0, "markers", 6),
        entry("run_moderate", 4.0, "accelerometers", 4), entry("sidestep", 4.0, "accelerometers", 4)}},
      {"encode", {{"size", 16}}},
      {"model", {{"input_size", 16}, {"conv1_channels", 2}, {"conv2_channels", 4}, {"hidden", 8}}},
      {"train", {{"epochs", 2}, {"batch_size", 4}, {"lr", 0.01}}},
  };
}

std::vector<std::map<std::string, std::string>> read_split(const std::filesystem::path& prepared) {
  std::vector<std::map<std::string, std::string>> rows;
  const auto text = io::read_text(prepared / "split.csv");
  std::size_t pos = text.find('\n') + 1;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const auto f = io::split_csv_line(std::string_view(text).substr(pos, end - pos));
    rows.push_back({{"trial_id", std::string(f[0])},
                    {"split", std::string(f[1])},
                    {"movement", std::string(f[3])},
                    {"limb", std::string(f[4])},
                    {"mirrored", std::string(f[5])}});
    pos = end + 1;
  }
  return rows;
}

}  // namespace

TEST_CASE("prepare applies subsets and splits") {
  TempDir tmp("pipeline_prepare");
  const auto base = config::parse_config(small_config());
  pipeline::run_synth(base, tmp / "corpus");

  SUBCASE("source-kind split over everything") {
    const auto s = pipeline::run_prepare(base, tmp / "corpus", tmp / "p");
    CHECK(s.n_train == 12);
    CHECK(s.n_test == 8);
    CHECK(s.k >= 1);
    for (const auto& r : read_split(tmp / "p")) {
      const bool accel = r.at("trial_id").find("_s2") != std::string::npos || r.at("trial_id").find("_s3") != std::string::npos;
      CHECK(r.at("split") == (accel ? "test" : "train"));
      const bool side = r.at("trial_id").find("sidestep") == 0;
      CHECK(r.at("movement") == (side ? "sidestep" : "run_moderate"));
    }
    CHECK(pipeline::load_split(tmp / "p", "train").size() == 12);
  }
  SUBCASE("sidestep, left stance only") {
    auto j = small_config();
    j["subset"] = {{"movement", "sidestep"}, {"limb", "left"}};
    const auto s = pipeline::run_prepare(config::parse_config(j), tmp / "corpus", tmp / "p");
    CHECK(s.n_train == 3);
    CHECK(s.n_test == 2);
    for (const auto& r : read_split(tmp / "p")) {
      CHECK(r.at("movement") == "sidestep");
      CHECK(r.at("limb") == "L");
    }
  }
  SUBCASE("combined limbs mirror the left trials") {
    auto j = small_config();
    j["subset"] = {{"limb", "combined"}};
    const auto s = pipeline::run_prepare(config::parse_config(j), tmp / "corpus", tmp / "p");
    CHECK(s.n_train + s.n_test == 20);
    std::size_t mirrored = 0;
    for (const auto& r : read_split(tmp / "p")) {
      CHECK(r.at("mirrored") == (r.at("limb") == "L" ? "1" : "0"));
      mirrored += r.at("mirrored") == "1" ? 1 : 0;
    }
    CHECK(mirrored == 10);
    for (const auto& sample : pipeline::load_split(tmp / "p", "train")) CHECK(sample.stance_limb == Limb::Right);
  }
  SUBCASE("hash split is a pure function of seed and trial id") {
    auto j = small_config();
    j["split"] = {{"mode", "hash"}, {"test_fraction", 0.3}};
    const auto cfg = config::parse_config(j);
    pipeline::run_prepare(cfg, tmp / "corpus", tmp / "a");
    pipeline::run_prepare(cfg, tmp / "corpus", tmp / "b");
    CHECK(io::read_text(tmp / "a" / "split.csv") == io::read_text(tmp / "b" / "split.csv"));
    j["seed"] = 6;
    pipeline::run_prepare(config::parse_config(j), tmp / "corpus", tmp / "c");
    CHECK(io::read_text(tmp / "a" / "split.csv") != io::read_text(tmp / "c" / "split.csv"));
  }
  SUBCASE("a subset with no test trials") {
    auto j = small_config();
    j["synth"] = json::array({j["synth"][0]});
    auto cfg = config::parse_config(j);
    pipeline::run_synth(cfg, tmp / "only_markers");
    try {
      pipeline::run_prepare(cfg, tmp / "only_markers", tmp / "p");
      FAIL("expected EmptySubset");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySubset);
    }
  }
}

TEST_CASE("full chain") {
  TempDir tmp("pipeline_chain");
  const auto cfg = config::parse_config(small_config());
  pipeline::run_synth(cfg, tmp / "corpus");
  pipeline::run_prepare(cfg, tmp / "corpus", tmp / "prep");
  const auto bundle = pipeline::run_train(cfg, tmp / "prep", tmp / "model");
  CHECK(bundle.history.size() == 2);
  CHECK(pipeline::run_train(cfg, tmp / "prep", tmp / "model2").id() == bundle.id());

  const auto manifest = json::parse(io::read_text(tmp / "prep" / pipeline::kManifest));
  CHECK(bundle.pca_checksum == manifest.at("pca_checksum").get<std::string>());

  pipeline::run_predict(cfg, tmp / "model", tmp / "prep", tmp / "pred");
  std::size_t csvs = 0;
  for (const auto& e : std::filesystem::directory_iterator(tmp / "pred")) csvs += e.path().extension() == ".csv";
  CHECK(csvs == 8);

  const auto ev = pipeline::run_evaluate(cfg, tmp / "pred", tmp / "prep", tmp / "eval");
  CHECK(ev.report.meta.n_train == 12);
  CHECK(ev.report.meta.n_test == 8);
  CHECK(ev.report.meta.experiment_id == "small");

  pipeline::run_report({tmp / "eval", tmp / "eval"}, tmp / "summary");
  CHECK(eval::read_report_csv(tmp / "summary" / "report.csv").size() == 2);

  SUBCASE("a replaced PCA model is refused") {
    auto bytes = io::read_bytes(tmp / "prep" / encode::kPcaBin);
    bytes.back() ^= 0x01;
    io::write_bytes(tmp / "prep" / encode::kPcaBin, bytes);
    try {
      pipeline::run_train(cfg, tmp / "prep", tmp / "model3");
      FAIL("expected ChecksumMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ChecksumMismatch);
    }
  }
}
