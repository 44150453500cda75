#pragma once

#include "accel2grf/model.hpp"
#include "accel2grf/types.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace accel2grf::eval {

namespace fs = std::filesystem;

/// One entry per trial; each holds the six stance-normalized channels.
using WaveformSet = std::vector<model::Waveforms>;

/// Pearson correlation of two equal-length series. Throws ZeroVariance.
double pearson_r(std::span<const double> pred, std::span<const double> truth);
/// Pooled r over the concatenation of all trials for one channel.
double pearson_r(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel);
/// Mean of per-trial r values (trials with zero variance are skipped); nullopt if none remain.
std::optional<double> per_trial_mean_r(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel);

/// RMSE / mean(peak-to-peak range of pred, of truth) * 100. Throws ZeroRange.
double rrmse(std::span<const double> pred, std::span<const double> truth);
/// Mean of per-trial rRMSE.
double rrmse(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel);

struct BlandAltmanPoint {
  double mean = 0.0;
  double diff = 0.0;
  std::size_t time_index = 0;  // stance sample index from FS
};

struct BlandAltman {
  double bias = 0.0;
  double sd = 0.0;  // sample standard deviation of the differences
  double loa_low = 0.0;
  double loa_high = 0.0;
  std::vector<BlandAltmanPoint> points;
};

BlandAltman bland_altman(std::span<const double> pred, std::span<const double> truth);
BlandAltman bland_altman(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel);

struct ChannelStats {
  std::size_t channel = 0;
  std::optional<double> r;             // nullopt = zero variance
  std::optional<double> r_trial_mean;  // auxiliary column
  std::optional<double> rrmse_pct;     // nullopt = zero range
  double bias = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
};

struct ExperimentMeta {
  std::string experiment_id;
  std::string movement;
  std::string stance_limb;
  std::string alignment;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct EvalReport {
  ExperimentMeta meta;
  std::array<ChannelStats, kForceChannels> channels{};
  std::optional<double> f_mean_r;
  std::optional<double> m_mean_r;
};

/// Fills f_mean_r / m_mean_r (arithmetic means; nullopt when a component is undefined).
EvalReport build_report(const ExperimentMeta& meta, const std::array<ChannelStats, kForceChannels>& stats);

ChannelStats channel_stats(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel);

struct OverlayRow {
  double stance_pct = 0.0;
  double truth_min = 0.0, truth_mean = 0.0, truth_max = 0.0;
  double pred_min = 0.0, pred_mean = 0.0, pred_max = 0.0;
};

std::vector<OverlayRow> overlay(const WaveformSet& pred, const WaveformSet& truth, std::size_t channel);

struct Evaluation {
  EvalReport report;
  std::array<std::vector<OverlayRow>, kForceChannels> overlays;
  std::array<BlandAltman, kForceChannels> bland_altman;
};

Evaluation evaluate(const ExperimentMeta& meta, const WaveformSet& pred, const WaveformSet& truth);

/// report.csv, overlay_<ch>.csv, bland_altman_<ch>.csv,
/// and overlay_<ch>.svg when `svg` is set.
void emit_report(const Evaluation& evaluation, const fs::path& out_dir, bool svg = false);

void write_report_csv(const std::vector<EvalReport>& rows, const fs::path& path);
std::vector<EvalReport> read_report_csv(const fs::path& path);

}  // namespace accel2grf::eval
