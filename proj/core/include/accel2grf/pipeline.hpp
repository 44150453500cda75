#pragma once

#include "accel2grf/config.hpp"
#include "accel2grf/error.hpp"
#include "accel2grf/eval.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace accel2grf::pipeline {

namespace fs = std::filesystem;

/// 0 ok, 2 config, 3 IO, 4 empty subset, 5 checksum mismatch, 1 anything else.
int exit_code(ErrorCode code);

inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kResolvedConfig = "resolved_config.json";

/// SHA-256 over the sorted "<file sha256>  <relative path>" lines of every file under dir.
std::string tree_checksum(const fs::path& dir);

simulate::CorpusManifest run_synth(const config::PipelineConfig& cfg, const fs::path& out);

struct PrepareSummary {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  std::size_t k = 0;
};

/// ingest -> virtual IMU for marker trials -> gait -> subset filter / mirroring
/// -> alignment -> encode; then output PCA on the training split.
PrepareSummary run_prepare(const config::PipelineConfig& cfg, const fs::path& corpus, const fs::path& out);

std::vector<encode::EncodedSample> load_split(const fs::path& prepared, const std::string& split);

model::WeightBundle run_train(const config::PipelineConfig& cfg, const fs::path& prepared, const fs::path& out);

/// Writes <trial_id>.csv (stance_pct, Fx..Mz in N and N*m) per sample of `split`.
void run_predict(const config::PipelineConfig& cfg, const fs::path& model_dir, const fs::path& prepared,
                 const fs::path& out, const std::string& split = "test");

eval::Evaluation run_evaluate(const config::PipelineConfig& cfg, const fs::path& predictions,
                              const fs::path& prepared, const fs::path& out);

/// Concatenates the report.csv rows of several evaluate outputs into out/report.csv.
void run_report(const std::vector<fs::path>& evaluations, const fs::path& out);

}  // namespace accel2grf::pipeline
