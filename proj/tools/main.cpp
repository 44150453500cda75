#include "accel2grf/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace accel2grf;

int main(int argc, char** argv) {
  CLI::App app{"accel2grf: accelerations to ground reaction forces and moments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--threads", threads, "Training threads (results do not depend on it)")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate the synthetic oracle corpus");

  auto* prepare = app.add_subcommand("prepare", "Ingest, align, encode and split a corpus");
  std::string corpus;
  prepare->add_option("--corpus", corpus, "Corpus root (default: config 'corpus', then $ACCEL2GRF_DATA_ROOT)");

  auto* train = app.add_subcommand("train", "Train a network on prepared samples");
  std::string prepared;
  std::string parent;
  train->add_option("--prepared", prepared, "Output of 'prepare'")->required();
  train->add_option("--parent", parent, "Warm-start from this model directory");

  auto* predict = app.add_subcommand("predict", "Predict GRF/M waveforms for prepared samples");
  std::string model_dir;
  std::string split = "test";
  predict->add_option("--model", model_dir, "Output of 'train'")->required();
  predict->add_option("--prepared", prepared, "Output of 'prepare'")->required();
  predict->add_option("--split", split, "Prepared split to predict")->check(CLI::IsMember({"train", "test"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against prepared ground truth");
  std::string predictions;
  evaluate->add_option("--predictions", predictions, "Output of 'predict'")->required();
  evaluate->add_option("--prepared", prepared, "Output of 'prepare'")->required();

  auto* report = app.add_subcommand("report", "Merge evaluate outputs into one experiment grid");
  std::vector<std::string> evaluations;
  report->add_option("evaluations", evaluations, "Directories written by 'evaluate'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    config::PipelineConfig cfg;
    if (!config_path.empty()) cfg = config::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    if (threads) cfg.train.threads = *threads;
    if (out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");

    if (synth->parsed()) {
      const auto m = pipeline::run_synth(cfg, out);
      std::cout << "wrote " << m.entries.size() << " trials to " << out << "\n";
    } else if (prepare->parsed()) {
      if (corpus.empty() && cfg.corpus) corpus = *cfg.corpus;
      if (corpus.empty()) {
        if (const char* root = std::getenv("ACCEL2GRF_DATA_ROOT")) corpus = root;
      }
      if (corpus.empty()) throw Error(ErrorCode::ConfigError, "/corpus: no corpus given (--corpus, config or ACCEL2GRF_DATA_ROOT)");
      const auto s = pipeline::run_prepare(cfg, corpus, out);
      std::cout << "train " << s.n_train << ", test " << s.n_test << ", rejected " << s.rejected << ", duplicates "
                << s.duplicates << ", K=" << s.k << "\n";
    } else if (train->parsed()) {
      if (!parent.empty()) cfg.parent_model = parent;
      const auto b = pipeline::run_train(cfg, prepared, out);
      std::cout << "best epoch " << b.best_epoch << " of " << b.history.size() << "\n";
    } else if (predict->parsed()) {
      pipeline::run_predict(cfg, model_dir, prepared, out, split);
    } else if (evaluate->parsed()) {
      const auto ev = pipeline::run_evaluate(cfg, predictions, prepared, out);
      for (const auto& c : ev.report.channels) {
        std::cout << "r(" << kForceChannelNames[c.channel] << ") = " << (c.r ? std::to_string(*c.r) : "undefined")
                  << "\n";
      }
    } else if (report->parsed()) {
      std::vector<fs::path> dirs(evaluations.begin(), evaluations.end());
      pipeline::run_report(dirs, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pipeline::exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
