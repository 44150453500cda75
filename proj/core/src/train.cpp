#include "accel2grf/model.hpp"

#include "accel2grf/error.hpp"
#include "accel2grf/io.hpp"
#include "accel2grf/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace accel2grf::model {

using nlohmann::json;

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "lr must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
  if (cfg.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");
  }
  if (cfg.threads == 0) throw Error(ErrorCode::InvalidArgument, "threads must be positive");
}

TrainSet to_train_set(const std::vector<encode::EncodedSample>& samples) {
  TrainSet set;
  for (const auto& s : samples) {
    if (!s.target) throw Error(ErrorCode::KMismatch, s.trial_id + " carries no PCA target");
    set.images.push_back(s.image);
    set.targets.push_back(*s.target);
  }
  return set;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(std::size_t n, double val_fraction,
                                                                               std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed, 0x76616cull);  // "val"
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  else n_val = 0;
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {tr, val};
}

double dataset_loss(const WeightBundle& bundle, const TrainSet& data) {
  if (data.size() == 0) return 0.0;
  Workspace ws;
  double sum = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    ws.input = image_to_input(data.images[n]);
    forward_into(bundle.spec, bundle.params, ws);
    for (std::size_t k = 0; k < ws.output.size(); ++k) {
      const double d = ws.output[k] - data.targets[n][k];
      sum += d * d;
    }
  }
  return sum / (2.0 * static_cast<double>(data.size()));
}

namespace {

void check_data(const WeightBundle& bundle, const TrainSet& data, const char* what) {
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (data.images[n].height != bundle.spec.input_size || data.images[n].width != bundle.spec.input_size) {
      throw Error(ErrorCode::DimensionMismatch, std::string(what) + " image size differs from the network input");
    }
    if (data.targets[n].size() != bundle.spec.k_outputs) {
      throw Error(ErrorCode::KMismatch, std::string(what) + " target has " + std::to_string(data.targets[n].size()) +
                                            " coefficients, network has K=" + std::to_string(bundle.spec.k_outputs));
    }
  }
}

// Forward + backward of one sample; adds its gradient to `grad`, returns 0.5 ||o - t||^2.
double sample_step(const WeightBundle& bundle, const encode::Image& image, const std::vector<double>& target,
                   double scale, Workspace& ws, std::vector<double>& grad) {
  ws.input = image_to_input(image);
  forward_into(bundle.spec, bundle.params, ws);
  std::vector<double> d_out(target.size());
  double sq = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double d = ws.output[k] - target[k];
    sq += d * d;
    d_out[k] = d * scale;
  }
  backward_into(bundle.spec, bundle.params, ws, d_out, grad);
  return 0.5 * sq;
}

}  // namespace

WeightBundle train(const WeightBundle& initial, const TrainSet& data, const TrainConfig& cfg,
                   const TrainSet* validation) {
  validate(cfg);
  if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "no training samples");
  check_data(initial, data, "training");

  std::vector<std::size_t> train_idx;
  TrainSet held_out;
  if (validation) {
    check_data(initial, *validation, "validation");
    held_out = *validation;
    train_idx.resize(data.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
  } else {
    auto [tr, val] = split_validation(data.size(), cfg.val_fraction, cfg.seed);
    train_idx = std::move(tr);
    for (std::size_t i : val) {
      held_out.images.push_back(data.images[i]);
      held_out.targets.push_back(data.targets[i]);
    }
  }
  TrainSet selection_set;
  const TrainSet* selection = &held_out;
  if (held_out.size() == 0) {
    for (std::size_t i : train_idx) {
      selection_set.images.push_back(data.images[i]);
      selection_set.targets.push_back(data.targets[i]);
    }
    selection = &selection_set;
  }

  WeightBundle bundle = initial;
  bundle.history.clear();
  WeightBundle best = bundle;
  double best_loss = dataset_loss(bundle, *selection);
  best.best_epoch = 0;

  const std::size_t n_params = bundle.params.size();
  std::vector<double> velocity(n_params, 0.0);
  std::vector<double> grad(n_params);
  const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
  std::vector<Workspace> workspaces(threads);
  std::vector<std::vector<double>> sample_grads;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto order = train_idx;
    Rng rng(cfg.seed, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t count = end - start;
      const double scale = 1.0 / static_cast<double>(count);
      std::fill(grad.begin(), grad.end(), 0.0);
      if (threads == 1) {
        for (std::size_t b = start; b < end; ++b) {
          epoch_sum += sample_step(bundle, data.images[order[b]], data.targets[order[b]], scale, workspaces[0], grad);
        }
      } else {
        // Per-sample buffers reduced in sample order, so the result does not depend on the thread count.
        sample_grads.resize(count);
        std::vector<double> losses(count);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(threads, count); ++t) {
          pool.emplace_back([&, t] {
            for (std::size_t b = t; b < count; b += threads) {
              sample_grads[b].assign(n_params, 0.0);
              losses[b] = sample_step(bundle, data.images[order[start + b]], data.targets[order[start + b]], scale,
                                      workspaces[t], sample_grads[b]);
            }
          });
        }
        for (auto& th : pool) th.join();
        for (std::size_t b = 0; b < count; ++b) {
          for (std::size_t i = 0; i < n_params; ++i) grad[i] += sample_grads[b][i];
          epoch_sum += losses[b];
        }
      }
      for (std::size_t i = 0; i < n_params; ++i) {
        velocity[i] = cfg.momentum * velocity[i] - cfg.lr * grad[i];
        bundle.params[i] += velocity[i];
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_sum / static_cast<double>(order.size());
    rec.val_loss = dataset_loss(bundle, *selection);
    bundle.history.push_back(rec);
    if (!std::isfinite(rec.train_loss)) throw Error(ErrorCode::InvalidArgument, "training diverged (non-finite loss)");
    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      best.params = bundle.params;
      best.best_epoch = epoch;
    }
  }
  best.history = bundle.history;
  return best;
}

WeightBundle train(const WeightBundle& initial, const std::vector<encode::EncodedSample>& samples,
                   const TrainConfig& cfg) {
  return train(initial, to_train_set(samples), cfg);
}

Waveforms waveforms_from_coefficients(const encode::OutputPcaModel& pca, const std::vector<double>& coeffs,
                                      const SubjectMeta& subject) {
  return encode::denormalize(encode::deinterlace(encode::reconstruct_target(pca, coeffs)), subject);
}

Waveforms predict_waveforms(const WeightBundle& bundle, const encode::OutputPcaModel& pca,
                            const encode::Image& image, const SubjectMeta& subject) {
  if (encode::pca_checksum(pca) != bundle.pca_checksum) {
    throw Error(ErrorCode::ChecksumMismatch, "PCA model does not match the one the network was trained with");
  }
  if (pca.k() != bundle.spec.k_outputs) throw Error(ErrorCode::DimensionMismatch, "PCA K differs from network outputs");
  return waveforms_from_coefficients(pca, forward(bundle, image), subject);
}

// ---------------------------------------------------------------------------

void save_bundle(const WeightBundle& bundle, const fs::path& dir) {
  io::ensure_directory(dir);
  io::ByteWriter w;
  for (double v : bundle.params) w.put_f64(v);
  const auto bytes = w.take();
  io::write_bytes(dir / kModelBin, bytes);

  json history = json::array();
  for (const auto& h : bundle.history) {
    history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss}});
  }
  const auto& s = bundle.spec;
  json j{{"format", "accel2grf-weights"},
         {"version", 1},
         {"spec",
          {{"input_size", s.input_size},
           {"conv1_channels", s.conv1_channels},
           {"conv2_channels", s.conv2_channels},
           {"hidden", s.hidden},
           {"k_outputs", s.k_outputs},
           {"linear", s.linear}}},
         {"parameter_count", bundle.params.size()},
         {"rng_seed", bundle.rng_seed},
         {"id", bundle.id()},
         {"parent_id", bundle.parent_id ? json(*bundle.parent_id) : json(nullptr)},
         {"pca_checksum", bundle.pca_checksum},
         {"best_epoch", bundle.best_epoch},
         {"history", history},
         {"checksum", io::sha256_hex(bytes)}};
  io::write_text(dir / kModelJson, j.dump(2) + "\n");
}

WeightBundle load_bundle(const fs::path& dir) {
  const auto j = json::parse(io::read_text(dir / kModelJson));
  const auto bytes = io::read_bytes(dir / kModelBin);
  if (io::sha256_hex(bytes) != j.at("checksum").get<std::string>()) {
    throw Error(ErrorCode::ChecksumMismatch, (dir / kModelBin).string() + " does not match its manifest");
  }
  WeightBundle b;
  const auto& s = j.at("spec");
  b.spec.input_size = s.at("input_size").get<std::size_t>();
  b.spec.conv1_channels = s.at("conv1_channels").get<std::size_t>();
  b.spec.conv2_channels = s.at("conv2_channels").get<std::size_t>();
  b.spec.hidden = s.at("hidden").get<std::size_t>();
  b.spec.k_outputs = s.at("k_outputs").get<std::size_t>();
  b.spec.linear = s.value("linear", false);
  b.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  b.pca_checksum = j.at("pca_checksum").get<std::string>();
  b.best_epoch = j.value("best_epoch", std::size_t{0});
  if (!j.at("parent_id").is_null()) b.parent_id = j.at("parent_id").get<std::string>();
  for (const auto& h : j.at("history")) {
    b.history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_loss").get<double>(), h.at("val_loss").get<double>()});
  }
  io::ByteReader r(bytes);
  b.params.resize(parameter_count(b.spec));
  for (auto& v : b.params) v = r.get_f64();
  if (!r.done()) throw Error(ErrorCode::ArchitectureMismatch, "model.bin size does not match the network spec");
  return b;
}

}  // namespace accel2grf::model
