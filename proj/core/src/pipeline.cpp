#include "accel2grf/pipeline.hpp"

#include "accel2grf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <sstream>

namespace accel2grf::pipeline {

using nlohmann::json;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return 2;
    case ErrorCode::IoError:
    case ErrorCode::MissingFile: return 3;
    case ErrorCode::EmptySubset: return 4;
    case ErrorCode::ChecksumMismatch: return 5;
    default: return 1;
  }
}

std::string tree_checksum(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->is_regular_file()) files.emplace_back(fs::relative(it->path(), dir).generic_string(), it->path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string());
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& [rel, path] : files) listing += io::sha256_file(path) + "  " + rel + "\n";
  return io::sha256_hex(listing);
}

namespace {

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

void write_stage(const fs::path& out, const std::string& stage, const config::PipelineConfig& cfg,
                 const json& inputs, const json& extra) {
  const json resolved = config::to_json(cfg);
  write_json(out / kResolvedConfig, resolved);
  json m{{"stage", stage}, {"config", resolved}, {"inputs", inputs}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(out / kManifest, m);
}

std::string hash_fraction_key(std::uint64_t seed, const std::string& trial_id) {
  return io::sha256_hex(std::to_string(seed) + ":" + trial_id);
}

bool in_test_split(const config::PipelineConfig& cfg, const TrialRecord& trial) {
  if (cfg.split == config::SplitMode::SourceKind) return trial.source_kind == SourceKind::Accelerometers;
  const std::string h = hash_fraction_key(cfg.seed, trial.trial_id);
  const double u = static_cast<double>(std::stoull(h.substr(0, 13), nullptr, 16)) / 0x1p52;
  return u < cfg.test_fraction;
}

bool movement_selected(config::MovementSubset subset, MovementClass cls) {
  switch (subset) {
    case config::MovementSubset::All: return true;
    case config::MovementSubset::Run: return is_run(cls);
    case config::MovementSubset::Sidestep: return cls == MovementClass::Sidestep;
  }
  return false;
}

bool limb_selected(config::LimbSubset subset, Limb limb) {
  switch (subset) {
    case config::LimbSubset::Left: return limb == Limb::Left;
    case config::LimbSubset::Right: return limb == Limb::Right;
    default: return true;
  }
}

std::vector<fs::path> corpus_trial_dirs(const fs::path& corpus) {
  std::vector<fs::path> dirs;
  if (fs::exists(corpus / simulate::kCorpusIndexName)) {
    for (const auto& e : simulate::read_corpus_index(corpus).entries) dirs.push_back(corpus / e.path);
  } else {
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(corpus, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
      if (it->is_regular_file() && it->path().filename() == ingest::kManifestName) dirs.push_back(it->path().parent_path());
    }
    if (ec) throw Error(ErrorCode::IoError, "cannot list corpus " + corpus.string());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::string csv_line(std::initializer_list<std::string> fields) {
  std::string s;
  for (const auto& f : fields) s += (s.empty() ? "" : ",") + f;
  return s + "\n";
}

}  // namespace

simulate::CorpusManifest run_synth(const config::PipelineConfig& cfg, const fs::path& out) {
  if (cfg.synth.empty()) throw Error(ErrorCode::ConfigError, "/synth: at least one generator spec is required");
  io::ensure_directory(out);
  auto manifest = simulate::generate_corpus(cfg.resolved_synth(), out);
  write_json(out / kResolvedConfig, config::to_json(cfg));
  return manifest;
}

PrepareSummary run_prepare(const config::PipelineConfig& cfg, const fs::path& corpus, const fs::path& out) {
  if (!fs::is_directory(corpus)) throw Error(ErrorCode::MissingFile, "corpus directory not found: " + corpus.string());
  const auto dirs = corpus_trial_dirs(corpus);
  io::ensure_directory(out);

  PrepareSummary summary;
  std::vector<encode::EncodedSample> train, test;
  std::map<std::string, std::string> seen_hashes;
  std::string split_csv = "trial_id,split,source_kind,movement,stance_limb,mirrored\n";
  std::string align_csv = "trial_id,sensor,mode,r00,r01,r02,r10,r11,r12,r20,r21,r22,fallback\n";
  std::string reject_csv = "trial_id,reason,detail\n";

  for (const auto& dir : dirs) {
    const TrialRecord raw = ingest::parse_trial(dir);
    const auto gate = ingest::quality_gate(raw, cfg.gate);
    if (!gate.ok()) {
      ++summary.rejected;
      std::string detail = gate.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      reject_csv += csv_line({raw.trial_id, std::string(ingest::to_string(*gate.reason)), detail});
      continue;
    }
    TrialRecord trial = *gate.accepted;
    const std::string hash = ingest::content_hash(trial);
    if (auto [it, inserted] = seen_hashes.emplace(hash, trial.trial_id); !inserted) {
      ++summary.duplicates;
      reject_csv += csv_line({trial.trial_id, "Duplicate", "same content as " + it->second});
      continue;
    }

    const auto window = gait::detect_stance_events(*trial.force, cfg.gate.contact);
    const auto label = gait::classify_movement(trial, window, cfg.movement);
    if (!movement_selected(cfg.movement_subset, label.cls)) continue;

    trial = simulate::markers_to_accelerations(trial, cfg.virtual_imu);
    const Limb limb = trial.stance_limb ? *trial.stance_limb : gait::detect_stance_limb(trial, window).limb;
    if (!limb_selected(cfg.limb_subset, limb)) continue;
    trial.stance_limb = limb;
    if (cfg.limb_subset == config::LimbSubset::Combined && limb == Limb::Left) {
      trial = gait::mirror_left_to_right(trial);
    }

    const auto aligned = align::align_trial(trial, cfg.alignment);
    for (const auto& r : aligned.rotations) {
      std::string row = trial.trial_id + "," + std::string(to_string(r.location)) + "," +
                        std::string(align::to_string(cfg.alignment));
      for (const auto& mr : r.rotation.m) {
        for (double v : mr) row += "," + io::format_double(v);
      }
      align_csv += row + "," + (r.fallback ? "1" : "0") + "\n";
    }
    if (aligned.rotations.empty()) {
      for (const auto& s : aligned.trial.sensors) {
        align_csv += trial.trial_id + "," + std::string(to_string(s.location)) + "," +
                     std::string(align::to_string(cfg.alignment)) + ",,,,,,,,,,0\n";
      }
    }

    encode::EncodedSample sample;
    sample.trial_id = trial.trial_id;
    auto encoded = encode::encode_image(aligned.trial, window, cfg.encode);
    sample.image = std::move(encoded.image);
    sample.scaling = encoded.pre_resize.scaling;
    sample.target_full = encode::build_target(*trial.force, window, trial.subject, cfg.encode.n_points);
    sample.stance_limb = trial.mirrored ? Limb::Right : limb;
    sample.movement = label.cls;
    sample.subject = trial.subject;
    sample.mirrored = trial.mirrored;
    sample.source_kind = trial.source_kind;

    const bool is_test = in_test_split(cfg, trial);
    split_csv += csv_line({trial.trial_id, is_test ? "test" : "train", std::string(to_string(trial.source_kind)),
                           std::string(to_string(label.cls)), std::string(to_string(limb)),
                           trial.mirrored ? "1" : "0"});
    (is_test ? test : train).push_back(std::move(sample));
  }

  if (train.empty() || test.empty()) {
    throw Error(ErrorCode::EmptySubset, "subset movement=" + std::string(config::to_string(cfg.movement_subset)) +
                                            " limb=" + std::string(config::to_string(cfg.limb_subset)) + " leaves " +
                                            std::to_string(train.size()) + " training and " +
                                            std::to_string(test.size()) + " test trials");
  }

  std::vector<std::vector<double>> targets;
  for (const auto& s : train) targets.push_back(s.target_full);
  const auto pca = encode::fit_output_pca(targets, cfg.variance_keep, cfg.k_cap);
  encode::save_pca(pca, out);

  for (auto* set : {&train, &test}) {
    const fs::path dir = out / (set == &train ? "train" : "test");
    if (fs::exists(dir)) fs::remove_all(dir);
    io::ensure_directory(dir);
    for (auto& s : *set) {
      s.target = encode::project_target(pca, s.target_full);
      encode::save_sample(s, dir);
    }
  }
  io::write_text(out / "split.csv", split_csv);
  io::write_text(out / "alignment_log.csv", align_csv);
  io::write_text(out / "rejects.csv", reject_csv);

  summary.n_train = train.size();
  summary.n_test = test.size();
  summary.k = pca.k();
  write_stage(out, "prepare", cfg, {{"corpus", tree_checksum(corpus)}},
              {{"pca_checksum", encode::pca_checksum(pca)},
               {"k", summary.k},
               {"counts",
                {{"train", summary.n_train},
                 {"test", summary.n_test},
                 {"rejected", summary.rejected},
                 {"duplicates", summary.duplicates}}}});
  return summary;
}

std::vector<encode::EncodedSample> load_split(const fs::path& prepared, const std::string& split) {
  const fs::path dir = prepared / split;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "missing prepared split " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<encode::EncodedSample> out;
  for (const auto& f : files) out.push_back(encode::load_sample(f));
  return out;
}

namespace {

// Loads pca.bin and checks it against the prepare manifest.
encode::OutputPcaModel load_prepared_pca(const fs::path& prepared, json* manifest_out = nullptr) {
  const json manifest = read_json(prepared / kManifest);
  auto pca = encode::load_pca(prepared);
  if (encode::pca_checksum(pca) != manifest.at("pca_checksum").get<std::string>()) {
    throw Error(ErrorCode::ChecksumMismatch, "pca.bin does not match " + (prepared / kManifest).string());
  }
  if (manifest_out) *manifest_out = manifest;
  return pca;
}

}  // namespace

model::WeightBundle run_train(const config::PipelineConfig& cfg, const fs::path& prepared, const fs::path& out) {
  const auto pca = load_prepared_pca(prepared);
  const auto samples = load_split(prepared, "train");
  if (samples.empty()) throw Error(ErrorCode::EmptySubset, "no training samples in " + prepared.string());

  model::NetworkSpec spec = cfg.network;
  spec.k_outputs = pca.k();
  std::optional<model::WeightBundle> parent;
  if (cfg.parent_model) parent = model::load_bundle(*cfg.parent_model);
  auto bundle = model::init_network(spec, cfg.seed, parent ? &*parent : nullptr);
  bundle.pca_checksum = encode::pca_checksum(pca);
  bundle = model::train(bundle, samples, cfg.train);

  io::ensure_directory(out);
  model::save_bundle(bundle, out);
  json inputs{{"prepared", io::sha256_file(prepared / kManifest)}, {"pca_checksum", bundle.pca_checksum}};
  if (parent) inputs["parent_id"] = parent->id();
  write_stage(out, "train", cfg, inputs, {{"model_id", bundle.id()}, {"best_epoch", bundle.best_epoch}});
  return bundle;
}

void run_predict(const config::PipelineConfig& cfg, const fs::path& model_dir, const fs::path& prepared,
                 const fs::path& out, const std::string& split) {
  const auto bundle = model::load_bundle(model_dir);
  const auto pca = load_prepared_pca(prepared);
  const auto samples = load_split(prepared, split);
  io::ensure_directory(out);
  json trials = json::array();
  for (const auto& s : samples) {
    const auto w = model::predict_waveforms(bundle, pca, s.image, s.subject);
    std::string text = "stance_pct,Fx,Fy,Fz,Mx,My,Mz\n";
    const std::size_t n = w[0].size();
    for (std::size_t i = 0; i < n; ++i) {
      text += io::format_double(n > 1 ? 100.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
      for (std::size_t c = 0; c < kForceChannels; ++c) text += "," + io::format_double(w[c][i]);
      text += "\n";
    }
    io::write_text(out / (s.trial_id + ".csv"), text);
    trials.push_back(s.trial_id);
  }
  write_stage(out, "predict", cfg,
              {{"model_id", bundle.id()}, {"pca_checksum", bundle.pca_checksum},
               {"prepared", io::sha256_file(prepared / kManifest)}},
              {{"split", split}, {"trials", trials}});
}

namespace {

model::Waveforms read_prediction_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);
  model::Waveforms w;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != 1 + kForceChannels) throw Error(ErrorCode::IoError, path.string() + ": wrong field count");
    for (std::size_t c = 0; c < kForceChannels; ++c) {
      auto v = io::parse_double(f[c + 1]);
      if (!v) throw Error(ErrorCode::IoError, path.string() + ": bad number");
      w[c].push_back(*v);
    }
  }
  return w;
}

}  // namespace

eval::Evaluation run_evaluate(const config::PipelineConfig& cfg, const fs::path& predictions,
                              const fs::path& prepared, const fs::path& out) {
  const json pred_manifest = read_json(predictions / kManifest);
  json prep_manifest;
  load_prepared_pca(prepared, &prep_manifest);
  if (pred_manifest.at("inputs").at("pca_checksum") != prep_manifest.at("pca_checksum")) {
    throw Error(ErrorCode::ChecksumMismatch, "predictions were made with a different PCA model than " + prepared.string());
  }
  const std::string split = pred_manifest.at("split").get<std::string>();
  eval::WaveformSet pred, truth;
  for (const auto& id : pred_manifest.at("trials")) {
    const std::string trial_id = id.get<std::string>();
    const auto sample = encode::load_sample(prepared / split / (trial_id + ".json"));
    truth.push_back(encode::denormalize(encode::deinterlace(sample.target_full), sample.subject));
    pred.push_back(read_prediction_csv(predictions / (trial_id + ".csv")));
  }
  if (pred.empty()) throw Error(ErrorCode::EmptySubset, "no predictions to evaluate");

  eval::ExperimentMeta meta;
  meta.experiment_id = cfg.experiment_id;
  meta.movement = std::string(config::to_string(cfg.movement_subset));
  meta.stance_limb = std::string(config::to_string(cfg.limb_subset));
  meta.alignment = std::string(align::to_string(cfg.alignment));
  meta.n_train = prep_manifest.at("counts").at("train").get<std::size_t>();
  meta.n_test = pred.size();

  auto evaluation = eval::evaluate(meta, pred, truth);
  io::ensure_directory(out);
  eval::emit_report(evaluation, out, cfg.svg);
  write_stage(out, "evaluate", cfg,
              {{"predictions", io::sha256_file(predictions / kManifest)},
               {"prepared", io::sha256_file(prepared / kManifest)}},
              json::object());
  return evaluation;
}

void run_report(const std::vector<fs::path>& evaluations, const fs::path& out) {
  std::vector<eval::EvalReport> rows;
  for (const auto& dir : evaluations) {
    const auto r = eval::read_report_csv(dir / "report.csv");
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty()) throw Error(ErrorCode::EmptySubset, "no report rows found");
  io::ensure_directory(out);
  eval::write_report_csv(rows, out / "report.csv");
}

}  // namespace accel2grf::pipeline
