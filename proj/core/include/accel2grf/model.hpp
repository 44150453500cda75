#pragma once

#include "accel2grf/encode.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace accel2grf::model {

namespace fs = std::filesystem;

/// conv3x3(conv1) + ReLU + maxpool2 -> conv3x3(conv2) + ReLU + maxpool2
/// -> dense(hidden) + ReLU -> dense(k_outputs). Convolutions use zero padding 1.
struct NetworkSpec {
  std::size_t input_size = 64;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t hidden = 128;
  std::size_t k_outputs = 1;
  bool linear = false;  // identity activations (gradient-check fixture)

  std::size_t pooled1() const { return input_size / 2; }
  std::size_t pooled2() const { return pooled1() / 2; }
  std::size_t flat_size() const { return conv2_channels * pooled2() * pooled2(); }
  bool operator==(const NetworkSpec&) const = default;
};

/// Offsets of one layer's weights and biases inside the flat parameter vector.
struct LayerSlice {
  std::size_t w_offset = 0;
  std::size_t w_count = 0;
  std::size_t b_offset = 0;
  std::size_t b_count = 0;
  std::size_t fan_in = 0;
};

inline constexpr std::size_t kLayers = 4;
std::array<LayerSlice, kLayers> layer_layout(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct WeightBundle {
  NetworkSpec spec;
  std::vector<double> params;  // layer-ordered: W then b for each layer
  std::uint64_t rng_seed = 0;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = initial weights
  std::string pca_checksum;
  std::optional<std::string> parent_id;

  /// SHA-256 of the parameter bytes.
  std::string id() const;
  bool operator==(const WeightBundle&) const = default;
};

/// He-uniform weights, zero biases, one RNG stream per layer. With a parent the
/// convolution and hidden layers are copied; the head is copied when K matches
/// and freshly initialized otherwise.
WeightBundle init_network(const NetworkSpec& spec, std::uint64_t seed,
                          const WeightBundle* parent = nullptr);

/// Intermediate buffers of one forward pass; reusable across calls.
struct Workspace {
  std::vector<double> input;  // CHW, 3 x S x S
  std::vector<double> conv1, pool1;
  std::vector<std::uint32_t> arg1;
  std::vector<double> conv2, pool2;
  std::vector<std::uint32_t> arg2;
  std::vector<double> hidden;
  std::vector<double> output;
  // backward scratch
  std::vector<double> d_hidden, d_pool2, d_conv2, d_pool1, d_conv1;
};

/// Bytes are converted once to reals b / 255.
std::vector<double> image_to_input(const encode::Image& image);

std::vector<double> forward(const WeightBundle& bundle, const encode::Image& image);
std::vector<double> forward_real(const WeightBundle& bundle, const std::vector<double>& input);
void forward_into(const NetworkSpec& spec, const std::vector<double>& params, Workspace& ws);

/// L = (1/2N) sum_n ||pred_n - target_n||^2.
double euclidean_loss(const std::vector<std::vector<double>>& pred,
                      const std::vector<std::vector<double>>& target);

/// Test hook for the gradient check's negative control.
enum class BackwardFault { None, IgnoreHiddenRelu };

/// Adds d(loss)/d(params) for one sample to `grad`, given d(loss)/d(output)
/// in `d_output`. Each parameter receives a single addition per call.
void backward_into(const NetworkSpec& spec, const std::vector<double>& params, Workspace& ws,
                   const std::vector<double>& d_output, std::vector<double>& grad,
                   BackwardFault fault = BackwardFault::None);

/// Full-batch loss and gradient in sample order.
double loss_and_gradient(const WeightBundle& bundle, const std::vector<encode::Image>& images,
                         const std::vector<std::vector<double>>& targets, std::vector<double>& grad,
                         BackwardFault fault = BackwardFault::None);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // parameters whose +-h probe changed a ReLU/max-pool decision
};

/// Central differences of the loss for every parameter against backprop.
/// Relative error |ga - gf| / max(|ga|, |gf|, 1e-8).
GradCheckResult grad_check(const WeightBundle& bundle, const std::vector<encode::Image>& images,
                           const std::vector<std::vector<double>>& targets, double h = 1e-3,
                           BackwardFault fault = BackwardFault::None);

struct TrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  std::size_t threads = 1;
};

void validate(const TrainConfig& cfg);

struct TrainSet {
  std::vector<encode::Image> images;
  std::vector<std::vector<double>> targets;
  std::size_t size() const { return images.size(); }
};

TrainSet to_train_set(const std::vector<encode::EncodedSample>& samples);

/// Seeded partition of n items into (train, val) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::size_t n, double val_fraction, std::uint64_t seed);

/// Mini-batch SGD with momentum. Without an explicit validation set a seeded
/// val_fraction partition is held out. Best-validation weights are returned.
WeightBundle train(const WeightBundle& initial, const TrainSet& data, const TrainConfig& cfg,
                   const TrainSet* validation = nullptr);
WeightBundle train(const WeightBundle& initial, const std::vector<encode::EncodedSample>& samples,
                   const TrainConfig& cfg);

double dataset_loss(const WeightBundle& bundle, const TrainSet& data);

using Waveforms = std::array<std::vector<double>, kForceChannels>;

/// PCA coefficients -> interlaced target -> channels in N and N*m.
Waveforms waveforms_from_coefficients(const encode::OutputPcaModel& pca,
                                      const std::vector<double>& coeffs,
                                      const SubjectMeta& subject);

/// Throws ChecksumMismatch unless the PCA model is the one the bundle was trained with.
Waveforms predict_waveforms(const WeightBundle& bundle, const encode::OutputPcaModel& pca,
                            const encode::Image& image, const SubjectMeta& subject);

inline constexpr const char* kModelJson = "model.json";
inline constexpr const char* kModelBin = "model.bin";

void save_bundle(const WeightBundle& bundle, const fs::path& dir);
/// Throws ChecksumMismatch when model.bin does not match the manifest.
WeightBundle load_bundle(const fs::path& dir);

}  // namespace accel2grf::model
