#include "accel2grf/config.hpp"

#include "accel2grf/error.hpp"
#include "accel2grf/io.hpp"

namespace accel2grf::config {

using nlohmann::json;

std::string_view to_string(SplitMode m) { return m == SplitMode::Hash ? "hash" : "source_kind"; }

std::string_view to_string(MovementSubset m) {
  switch (m) {
    case MovementSubset::All: return "all";
    case MovementSubset::Run: return "run";
    case MovementSubset::Sidestep: return "sidestep";
  }
  return "all";
}

std::string_view to_string(LimbSubset m) {
  switch (m) {
    case LimbSubset::Both: return "both";
    case LimbSubset::Left: return "left";
    case LimbSubset::Right: return "right";
    case LimbSubset::Combined: return "combined";
  }
  return "both";
}

const std::map<std::string, std::vector<std::string>>& accepted_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"", {"experiment_id", "seed", "corpus", "synth", "virtual_imu", "alignment", "gait", "encode", "pca", "split",
            "subset", "model", "train", "eval"}},
      {"/synth/*",
       {"movement", "n_trials", "speed_mps", "stance_ms", "noise_std_mps2", "source_kind", "limb", "mount",
        "mount_rotations", "marker_hz", "accel_hz", "force_hz", "seed", "id_prefix"}},
      {"/virtual_imu", {"output_hz", "include_gravity", "lowpass_cutoff_hz"}},
      {"/gait",
       {"threshold_n", "min_contact_frames", "max_gap_frames", "lead_fraction", "running_threshold_mps",
        "sidestep_angle_deg", "trend_threshold_mps_per_stance", "strict_bins"}},
      {"/encode", {"size", "n_points", "fixed_range_mps2", "time_upwards"}},
      {"/pca", {"variance_keep", "k_cap"}},
      {"/split", {"mode", "test_fraction"}},
      {"/subset", {"movement", "limb"}},
      {"/model", {"input_size", "conv1_channels", "conv2_channels", "hidden"}},
      {"/train", {"lr", "momentum", "batch_size", "epochs", "val_fraction", "threads", "parent_model"}},
      {"/eval", {"svg"}},
  };
  return keys;
}

namespace {

[[noreturn]] void fail(const std::string& pointer, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, (pointer.empty() ? "/" : pointer) + ": " + msg);
}

// Typed member access with JSON-pointer error paths.
class Obj {
 public:
  Obj(const json* j, std::string ptr, const std::string& schema_key) : j_(j), ptr_(std::move(ptr)) {
    if (!j_) return;
    if (!j_->is_object()) fail(ptr_, "expected an object");
    const auto& allowed = accepted_keys().at(schema_key);
    for (const auto& [k, v] : j_->items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) fail(at(k), "unknown key");
    }
  }

  std::string at(const std::string& key) const { return ptr_ + "/" + key; }
  const json* find(const std::string& key) const {
    if (!j_) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) const {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) fail(at(key), "expected a number");
    return v->get<double>();
  }
  std::optional<double> opt_number(const std::string& key, std::optional<double> def = std::nullopt) const {
    const json* v = find(key);
    if (!v) return def;
    if (v->is_null()) return std::nullopt;
    if (!v->is_number()) fail(at(key), "expected a number or null");
    return v->get<double>();
  }
  std::uint64_t integer(const std::string& key, std::uint64_t def) const {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
      fail(at(key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool def) const {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(at(key), "expected a boolean");
    return v->get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) const {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) fail(at(key), "expected a string");
    return v->get<std::string>();
  }
  std::optional<std::string> opt_string(const std::string& key) const {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_string()) fail(at(key), "expected a string or null");
    return v->get<std::string>();
  }
  void require(bool ok, const std::string& key, const std::string& msg) const {
    if (!ok) fail(at(key), msg);
  }

 private:
  const json* j_;
  std::string ptr_;
};

template <class T, class Parse>
T enum_field(const Obj& o, const std::string& key, T def, Parse parse, const char* allowed) {
  if (!o.find(key)) return def;
  auto v = parse(o.string(key, ""));
  if (!v) fail(o.at(key), std::string("expected one of ") + allowed);
  return *v;
}

std::optional<simulate::LimbPolicy> parse_limb_policy(std::string_view s) {
  if (s == "right") return simulate::LimbPolicy::Right;
  if (s == "left") return simulate::LimbPolicy::Left;
  if (s == "alternate") return simulate::LimbPolicy::Alternate;
  return std::nullopt;
}

std::string_view to_string(simulate::LimbPolicy p) {
  switch (p) {
    case simulate::LimbPolicy::Right: return "right";
    case simulate::LimbPolicy::Left: return "left";
    case simulate::LimbPolicy::Alternate: return "alternate";
  }
  return "alternate";
}

std::optional<simulate::MountPolicy> parse_mount_policy(std::string_view s) {
  if (s == "none") return simulate::MountPolicy::None;
  if (s == "random") return simulate::MountPolicy::Random;
  if (s == "explicit") return simulate::MountPolicy::Explicit;
  return std::nullopt;
}

std::string_view to_string(simulate::MountPolicy p) {
  switch (p) {
    case simulate::MountPolicy::None: return "none";
    case simulate::MountPolicy::Random: return "random";
    case simulate::MountPolicy::Explicit: return "explicit";
  }
  return "none";
}

std::optional<SplitMode> parse_split(std::string_view s) {
  if (s == "source_kind") return SplitMode::SourceKind;
  if (s == "hash") return SplitMode::Hash;
  return std::nullopt;
}

std::optional<MovementSubset> parse_movement_subset(std::string_view s) {
  if (s == "all") return MovementSubset::All;
  if (s == "run") return MovementSubset::Run;
  if (s == "sidestep") return MovementSubset::Sidestep;
  return std::nullopt;
}

std::optional<LimbSubset> parse_limb_subset(std::string_view s) {
  if (s == "both") return LimbSubset::Both;
  if (s == "left") return LimbSubset::Left;
  if (s == "right") return LimbSubset::Right;
  if (s == "combined") return LimbSubset::Combined;
  return std::nullopt;
}

SynthEntry parse_synth(const json& j, const std::string& ptr) {
  const Obj o(&j, ptr, "/synth/*");
  SynthEntry e;
  auto& s = e.spec;
  o.require(o.find("movement") != nullptr, "movement", "required");
  s.movement = enum_field(o, "movement", s.movement, parse_movement,
                          "run_slow, run_moderate, run_fast, run_accel, run_decel, sidestep");
  o.require(s.movement != MovementClass::Other, "movement", "'other' cannot be synthesized");
  s.n_trials = o.integer("n_trials", s.n_trials);
  s.speed_mps = o.number("speed_mps", s.speed_mps);
  s.stance_ms = o.number("stance_ms", s.stance_ms);
  s.noise_std_mps2 = o.number("noise_std_mps2", s.noise_std_mps2);
  s.source_kind = enum_field(o, "source_kind", s.source_kind, parse_source_kind, "markers, accelerometers");
  s.limb = enum_field(o, "limb", s.limb, parse_limb_policy, "right, left, alternate");
  s.mount = enum_field(o, "mount", s.mount, parse_mount_policy, "none, random, explicit");
  s.marker_hz = o.number("marker_hz", s.marker_hz);
  s.accel_hz = o.number("accel_hz", s.accel_hz);
  s.force_hz = o.number("force_hz", s.force_hz);
  if (o.find("seed")) e.seed = o.integer("seed", 0);
  e.id_prefix = o.opt_string("id_prefix");
  if (const json* m = o.find("mount_rotations"); m && !m->is_null()) {
    o.require(m->is_array(), "mount_rotations", "expected an array of 3x3 row-major matrices");
    for (std::size_t i = 0; i < m->size(); ++i) {
      const auto& r = (*m)[i];
      const std::string p = o.at("mount_rotations") + "/" + std::to_string(i);
      if (!r.is_array() || r.size() != 9) fail(p, "expected 9 numbers");
      align::RotationMatrix3 rot;
      for (std::size_t k = 0; k < 9; ++k) {
        if (!r[k].is_number()) fail(p + "/" + std::to_string(k), "expected a number");
        rot.m[k / 3][k % 3] = r[k].get<double>();
      }
      s.mount_rotations.push_back(rot);
    }
  }
  try {
    simulate::validate(s);
  } catch (const Error& err) {
    fail(ptr, err.what());
  }
  return e;
}

}  // namespace

std::vector<simulate::SynthSpec> PipelineConfig::resolved_synth() const {
  std::vector<simulate::SynthSpec> out;
  for (std::size_t i = 0; i < synth.size(); ++i) {
    auto s = synth[i].spec;
    s.seed = synth[i].seed.value_or(seed + i);
    s.id_prefix = synth[i].id_prefix.value_or(std::string(accel2grf::to_string(s.movement)) + "_s" + std::to_string(i));
    out.push_back(std::move(s));
  }
  return out;
}

PipelineConfig parse_config(const json& j) {
  PipelineConfig c;
  const Obj root(&j, "", "");
  c.experiment_id = root.string("experiment_id", c.experiment_id);
  root.require(!c.experiment_id.empty() && c.experiment_id.find_first_of(",\n\r") == std::string::npos, "experiment_id",
               "must be non-empty and free of commas and newlines");
  c.seed = root.integer("seed", c.seed);
  c.corpus = root.opt_string("corpus");

  if (const json* s = root.find("synth")) {
    root.require(s->is_array(), "synth", "expected an array of generator specs");
    for (std::size_t i = 0; i < s->size(); ++i) c.synth.push_back(parse_synth((*s)[i], "/synth/" + std::to_string(i)));
  }

  const Obj vi(root.find("virtual_imu"), "/virtual_imu", "/virtual_imu");
  c.virtual_imu.output_hz = vi.number("output_hz", c.virtual_imu.output_hz);
  vi.require(c.virtual_imu.output_hz > 0.0, "output_hz", "must be > 0");
  c.virtual_imu.include_gravity = vi.boolean("include_gravity", c.virtual_imu.include_gravity);
  c.virtual_imu.lowpass_cutoff_hz = vi.opt_number("lowpass_cutoff_hz");
  if (c.virtual_imu.lowpass_cutoff_hz) {
    vi.require(*c.virtual_imu.lowpass_cutoff_hz > 0.0 && *c.virtual_imu.lowpass_cutoff_hz < c.virtual_imu.output_hz / 2.0,
               "lowpass_cutoff_hz", "must lie in (0, output_hz / 2)");
  }

  c.alignment = enum_field(root, "alignment", c.alignment, align::parse_alignment, "pca, norm");

  const Obj g(root.find("gait"), "/gait", "/gait");
  c.gate.contact.threshold_n = g.number("threshold_n", c.gate.contact.threshold_n);
  g.require(c.gate.contact.threshold_n > 0.0, "threshold_n", "must be > 0");
  c.gate.contact.min_contact_frames = g.integer("min_contact_frames", c.gate.contact.min_contact_frames);
  g.require(c.gate.contact.min_contact_frames >= 1, "min_contact_frames", "must be >= 1");
  c.gate.max_gap_frames = g.integer("max_gap_frames", c.gate.max_gap_frames);
  c.lead_fraction = g.opt_number("lead_fraction");
  if (c.lead_fraction) g.require(*c.lead_fraction >= 0.0 && *c.lead_fraction <= 1.0, "lead_fraction", "must lie in [0, 1]");
  c.movement.running_threshold_mps = g.number("running_threshold_mps", c.movement.running_threshold_mps);
  g.require(c.movement.running_threshold_mps > 0.0, "running_threshold_mps", "must be > 0");
  c.movement.sidestep_angle_deg = g.number("sidestep_angle_deg", c.movement.sidestep_angle_deg);
  g.require(c.movement.sidestep_angle_deg > 0.0 && c.movement.sidestep_angle_deg < 180.0, "sidestep_angle_deg",
            "must lie in (0, 180)");
  c.movement.trend_threshold_mps_per_stance =
      g.number("trend_threshold_mps_per_stance", c.movement.trend_threshold_mps_per_stance);
  g.require(c.movement.trend_threshold_mps_per_stance > 0.0, "trend_threshold_mps_per_stance", "must be > 0");
  c.movement.strict_bins = g.boolean("strict_bins", c.movement.strict_bins);

  const Obj m(root.find("model"), "/model", "/model");
  c.network.input_size = m.integer("input_size", c.network.input_size);
  m.require(c.network.input_size >= 4, "input_size", "must be >= 4");
  c.network.conv1_channels = m.integer("conv1_channels", c.network.conv1_channels);
  m.require(c.network.conv1_channels >= 1, "conv1_channels", "must be >= 1");
  c.network.conv2_channels = m.integer("conv2_channels", c.network.conv2_channels);
  m.require(c.network.conv2_channels >= 1, "conv2_channels", "must be >= 1");
  c.network.hidden = m.integer("hidden", c.network.hidden);
  m.require(c.network.hidden >= 1, "hidden", "must be >= 1");

  const Obj e(root.find("encode"), "/encode", "/encode");
  c.encode.size = e.integer("size", c.network.input_size);
  e.require(c.encode.size == c.network.input_size, "size", "must equal /model/input_size");
  c.encode.n_points = e.integer("n_points", c.encode.n_points);
  e.require(c.encode.n_points >= 2, "n_points", "must be >= 2");
  c.encode.fixed_range_mps2 = e.opt_number("fixed_range_mps2");
  if (c.encode.fixed_range_mps2) e.require(*c.encode.fixed_range_mps2 > 0.0, "fixed_range_mps2", "must be > 0");
  c.encode.time_upwards = e.boolean("time_upwards", c.encode.time_upwards);
  c.encode.lead_fraction = c.lead_fraction;

  const Obj p(root.find("pca"), "/pca", "/pca");
  c.variance_keep = p.number("variance_keep", c.variance_keep);
  p.require(c.variance_keep > 0.0 && c.variance_keep <= 1.0, "variance_keep", "must lie in (0, 1]");
  c.k_cap = p.integer("k_cap", c.k_cap);
  p.require(c.k_cap >= 1, "k_cap", "must be >= 1");

  const Obj sp(root.find("split"), "/split", "/split");
  c.split = enum_field(sp, "mode", c.split, parse_split, "source_kind, hash");
  c.test_fraction = sp.number("test_fraction", c.test_fraction);
  sp.require(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction", "must lie in (0, 1)");

  const Obj sub(root.find("subset"), "/subset", "/subset");
  c.movement_subset = enum_field(sub, "movement", c.movement_subset, parse_movement_subset, "all, run, sidestep");
  c.limb_subset = enum_field(sub, "limb", c.limb_subset, parse_limb_subset, "both, left, right, combined");

  const Obj t(root.find("train"), "/train", "/train");
  c.train.lr = t.number("lr", c.train.lr);
  t.require(c.train.lr > 0.0, "lr", "must be > 0");
  c.train.momentum = t.number("momentum", c.train.momentum);
  t.require(c.train.momentum >= 0.0 && c.train.momentum < 1.0, "momentum", "must lie in [0, 1)");
  c.train.batch_size = t.integer("batch_size", c.train.batch_size);
  t.require(c.train.batch_size >= 1, "batch_size", "must be >= 1");
  c.train.epochs = t.integer("epochs", c.train.epochs);
  c.train.val_fraction = t.number("val_fraction", c.train.val_fraction);
  t.require(c.train.val_fraction > 0.0 && c.train.val_fraction < 1.0, "val_fraction", "must lie in (0, 1)");
  c.train.threads = t.integer("threads", c.train.threads);
  t.require(c.train.threads >= 1, "threads", "must be >= 1");
  c.parent_model = t.opt_string("parent_model");
  c.train.seed = c.seed;

  const Obj ev(root.find("eval"), "/eval", "/eval");
  c.svg = ev.boolean("svg", c.svg);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  const std::string text = io::read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, "/: not valid JSON (" + std::string(e.what()) + ")");
  }
  return parse_config(j);
}

json to_json(const PipelineConfig& c) {
  json synth = json::array();
  for (const auto& e : c.synth) {
    const auto& s = e.spec;
    json o{{"movement", std::string(accel2grf::to_string(s.movement))},
           {"n_trials", s.n_trials},
           {"speed_mps", s.speed_mps},
           {"stance_ms", s.stance_ms},
           {"noise_std_mps2", s.noise_std_mps2},
           {"source_kind", std::string(accel2grf::to_string(s.source_kind))},
           {"limb", std::string(to_string(s.limb))},
           {"mount", std::string(to_string(s.mount))},
           {"marker_hz", s.marker_hz},
           {"accel_hz", s.accel_hz},
           {"force_hz", s.force_hz}};
    if (e.seed) o["seed"] = *e.seed;
    if (e.id_prefix) o["id_prefix"] = *e.id_prefix;
    if (!s.mount_rotations.empty()) {
      json rots = json::array();
      for (const auto& r : s.mount_rotations) {
        json flat = json::array();
        for (const auto& row : r.m) {
          for (double v : row) flat.push_back(v);
        }
        rots.push_back(flat);
      }
      o["mount_rotations"] = rots;
    }
    synth.push_back(o);
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"experiment_id", c.experiment_id},
      {"seed", c.seed},
      {"corpus", c.corpus ? json(*c.corpus) : json(nullptr)},
      {"synth", synth},
      {"virtual_imu",
       {{"output_hz", c.virtual_imu.output_hz},
        {"include_gravity", c.virtual_imu.include_gravity},
        {"lowpass_cutoff_hz", opt(c.virtual_imu.lowpass_cutoff_hz)}}},
      {"alignment", std::string(align::to_string(c.alignment))},
      {"gait",
       {{"threshold_n", c.gate.contact.threshold_n},
        {"min_contact_frames", c.gate.contact.min_contact_frames},
        {"max_gap_frames", c.gate.max_gap_frames},
        {"lead_fraction", opt(c.lead_fraction)},
        {"running_threshold_mps", c.movement.running_threshold_mps},
        {"sidestep_angle_deg", c.movement.sidestep_angle_deg},
        {"trend_threshold_mps_per_stance", c.movement.trend_threshold_mps_per_stance},
        {"strict_bins", c.movement.strict_bins}}},
      {"encode",
       {{"size", c.encode.size},
        {"n_points", c.encode.n_points},
        {"fixed_range_mps2", opt(c.encode.fixed_range_mps2)},
        {"time_upwards", c.encode.time_upwards}}},
      {"pca", {{"variance_keep", c.variance_keep}, {"k_cap", c.k_cap}}},
      {"split", {{"mode", std::string(to_string(c.split))}, {"test_fraction", c.test_fraction}}},
      {"subset",
       {{"movement", std::string(to_string(c.movement_subset))}, {"limb", std::string(to_string(c.limb_subset))}}},
      {"model",
       {{"input_size", c.network.input_size},
        {"conv1_channels", c.network.conv1_channels},
        {"conv2_channels", c.network.conv2_channels},
        {"hidden", c.network.hidden}}},
      {"train",
       {{"lr", c.train.lr},
        {"momentum", c.train.momentum},
        {"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"val_fraction", c.train.val_fraction},
        {"threads", c.train.threads},
        {"parent_model", c.parent_model ? json(*c.parent_model) : json(nullptr)}}},
      {"eval", {{"svg", c.svg}}},
  };
}

}  // namespace accel2grf::config
