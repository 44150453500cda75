#include "accel2grf/encode.hpp"
#include "accel2grf/eval.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>

using namespace accel2grf;
using nlohmann::json;
using testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args, const TempDir& tmp) {
  const char* exe = std::getenv("ACCEL2GRF_CLI");
  REQUIRE(exe != nullptr);
  const auto log = tmp / "cli.log";
  const std::string cmd = std::string("\"") + exe + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = io::read_text(log);
  return r;
}

json tiny_config(double variance_keep = 0.995) {
  auto entry = [](const char* kind, int n) {
    return json{{"movement", "run_moderate"}, {"speed_mps", 4.0}, {"source_kind", kind}, {"n_trials", n}};
  };
  return {{"experiment_id", "cli"},
          {"seed", 3},
          {"synth", {entry("markers", 6), entry("accelerometers", 3)}},
          {"encode", {{"size", 16}}},
          {"pca", {{"variance_keep", variance_keep}}},
          {"model", {{"input_size", 16}, {"conv1_channels", 2}, {"conv2_channels", 2}, {"hidden", 4}}},
          {"train", {{"epochs", 1}, {"batch_size", 3}}}};
}

std::string write_config(const TempDir& tmp, const std::string& name, const json& j) {
  io::write_text(tmp / name, j.dump(2));
  return (tmp / name).string();
}

}  // namespace

TEST_CASE("command line") {
  TempDir tmp("cli");
  const auto cfg = write_config(tmp, "tiny.json", tiny_config());
  const auto corpus = (tmp / "corpus").string();

  const auto synth = cli("--config " + cfg + " --out " + corpus + " synth", tmp);
  REQUIRE(synth.code == 0);
  CHECK(simulate::read_corpus_index(corpus).entries.size() == 9);

  SUBCASE("full chain with exit 0") {
    const auto prep = (tmp / "prep").string();
    REQUIRE(cli("--config " + cfg + " --out " + prep + " prepare --corpus " + corpus, tmp).code == 0);
    const auto model = (tmp / "model").string();
    REQUIRE(cli("--config " + cfg + " --out " + model + " --threads 2 train --prepared " + prep, tmp).code == 0);
    const auto pred = (tmp / "pred").string();
    REQUIRE(cli("--config " + cfg + " --out " + pred + " predict --model " + model + " --prepared " + prep, tmp).code ==
            0);

    // Replace the predictions with the ground truth: every defined r must be 1.
    for (const auto& s : pipeline::load_split(prep, "test")) {
      const auto w = encode::denormalize(encode::deinterlace(s.target_full), s.subject);
      std::string text = "stance_pct,Fx,Fy,Fz,Mx,My,Mz\n";
      for (std::size_t i = 0; i < w[0].size(); ++i) {
        text += io::format_double(static_cast<double>(i));
        for (const auto& ch : w) text += "," + io::format_double(ch[i]);
        text += "\n";
      }
      io::write_text(std::filesystem::path(pred) / (s.trial_id + ".csv"), text);
    }
    const auto ev = (tmp / "eval").string();
    REQUIRE(cli("--config " + cfg + " --out " + ev + " evaluate --predictions " + pred + " --prepared " + prep, tmp)
                .code == 0);
    const auto rows = eval::read_report_csv(std::filesystem::path(ev) / "report.csv");
    REQUIRE(rows.size() == 1);
    for (const auto& c : rows[0].channels) {
      if (c.r) CHECK(*c.r == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(c.bias == 0.0);
    }
    const auto rep = (tmp / "rep").string();
    CHECK(cli("--out " + rep + " report " + ev + " " + ev, tmp).code == 0);
  }
  SUBCASE("malformed config exits 2 and names the field") {
    auto j = tiny_config();
    j["train"]["lr"] = -0.5;
    const auto bad = write_config(tmp, "bad.json", j);
    const auto r = cli("--config " + bad + " --out " + (tmp / "x").string() + " synth", tmp);
    CHECK(r.code == 2);
    CHECK(r.output.find("/train/lr") != std::string::npos);
    CHECK(cli("--bogus-flag synth", tmp).code == 2);
  }
  SUBCASE("unwritable output exits 3") {
    io::write_text(tmp / "plain_file", "x");
    const auto r = cli("--config " + cfg + " --out " + (tmp / "plain_file" / "sub").string() + " synth", tmp);
    CHECK(r.code == 3);
  }
  SUBCASE("empty subset exits 4") {
    auto j = tiny_config();
    j["subset"] = {{"movement", "sidestep"}};
    const auto side = write_config(tmp, "side.json", j);
    CHECK(cli("--config " + side + " --out " + (tmp / "p").string() + " prepare --corpus " + corpus, tmp).code == 4);
  }
  SUBCASE("predicting with a foreign PCA model exits 5") {
    const auto other_cfg = write_config(tmp, "other.json", tiny_config(0.5));
    const auto prep_a = (tmp / "prep_a").string();
    const auto prep_b = (tmp / "prep_b").string();
    REQUIRE(cli("--config " + cfg + " --out " + prep_a + " prepare --corpus " + corpus, tmp).code == 0);
    REQUIRE(cli("--config " + other_cfg + " --out " + prep_b + " prepare --corpus " + corpus, tmp).code == 0);
    const auto model = (tmp / "model_a").string();
    REQUIRE(cli("--config " + cfg + " --out " + model + " train --prepared " + prep_a, tmp).code == 0);
    const auto r =
        cli("--config " + cfg + " --out " + (tmp / "pred_b").string() + " predict --model " + model + " --prepared " +
                prep_b,
            tmp);
    CHECK(r.code == 5);
  }
}
