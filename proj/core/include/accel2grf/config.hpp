#pragma once

#include "accel2grf/align.hpp"
#include "accel2grf/encode.hpp"
#include "accel2grf/gait.hpp"
#include "accel2grf/ingest.hpp"
#include "accel2grf/model.hpp"
#include "accel2grf/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace accel2grf::config {

namespace fs = std::filesystem;

enum class SplitMode { SourceKind, Hash };
enum class MovementSubset { All, Run, Sidestep };
enum class LimbSubset { Both, Left, Right, Combined };

std::string_view to_string(SplitMode m);
std::string_view to_string(MovementSubset m);
std::string_view to_string(LimbSubset m);

struct SynthEntry {
  simulate::SynthSpec spec;
  std::optional<std::uint64_t> seed;  // unset: global seed + entry index
  std::optional<std::string> id_prefix;
};

struct PipelineConfig {
  std::string experiment_id = "experiment";
  std::uint64_t seed = 0;
  std::optional<std::string> corpus;  // default corpus root for prepare

  std::vector<SynthEntry> synth;
  simulate::VirtualImuConfig virtual_imu;

  align::AlignmentMode alignment = align::AlignmentMode::Pca;
  ingest::GateConfig gate;
  gait::MovementConfig movement;
  std::optional<double> lead_fraction;

  encode::EncodeOptions encode = [] {
    encode::EncodeOptions o;
    o.size = 64;  // follows the network input size
    return o;
  }();
  double variance_keep = 0.995;
  std::size_t k_cap = 64;

  SplitMode split = SplitMode::SourceKind;
  double test_fraction = 0.2;
  MovementSubset movement_subset = MovementSubset::All;
  LimbSubset limb_subset = LimbSubset::Both;

  model::NetworkSpec network;  // k_outputs comes from the fitted PCA
  model::TrainConfig train;
  std::optional<std::string> parent_model;  // cascade warm start

  bool svg = false;

  /// Synth specs with seeds and id prefixes filled in.
  std::vector<simulate::SynthSpec> resolved_synth() const;
};

/// Validates against the published schema rules. Errors are ConfigError with
/// a JSON-pointer prefix, e.g. "/train/lr: must be > 0".
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const fs::path& path);

/// Every field, defaults included; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const PipelineConfig& cfg);

/// Object members the parser accepts, keyed by JSON pointer of the object.
const std::map<std::string, std::vector<std::string>>& accepted_keys();

}  // namespace accel2grf::config
