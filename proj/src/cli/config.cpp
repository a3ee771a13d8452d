#include "surfkin/cli/config.hpp"

#include <sstream>

#include "surfkin/io/atomic_file.hpp"

namespace surfkin::cli {

using nlohmann::json;

namespace {

json train_defaults() {
  return {{"batch_size", 32},
          {"learning_rate", 1e-3},
          {"max_epochs", 150},
          {"final_lr_fraction", 1.0},
          {"weight_decay", 0.0}};
}

// Every key in `user` must exist in `reference`; objects recurse. "gap" and
// "mannequin" may be replaced wholesale by an object.
void check_keys(const json& user, const json& reference, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) throw InputError("config: unknown key '" + path + "'");
    if (path == "gap" || path == "mannequin") continue;
    const json& ref = reference.at(key);
    if (ref.is_object()) {
      if (!value.is_object()) throw InputError("config: '" + path + "' must be an object");
      check_keys(value, ref, path);
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config: bad or missing value for '" + section + "." + key + "'");
  }
}

nn::TrainConfig train_config(const json& t, std::uint64_t seed, const std::string& section) {
  nn::TrainConfig c;
  c.batch_size = get<int>(t, "batch_size", section);
  c.learning_rate = get<double>(t, "learning_rate", section);
  c.max_epochs = get<int>(t, "max_epochs", section);
  c.final_lr_fraction = get<double>(t, "final_lr_fraction", section);
  c.weight_decay = get<double>(t, "weight_decay", section);
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

json default_config() {
  const oracle::CaptureConfig cap;
  return {{"seed", 0},
          {"mannequin", "default"},
          {"gap", "default"},
          {"dataset",
           {{"m", 30},
            {"n", 30},
            {"degree", 3},
            {"include_corners", true},
            {"halton_count", 488},
            {"halton_skip", 0},
            {"ridge", 1e-8},
            {"train_fraction", 0.7}}},
          {"fk", {{"target", "delta"}, {"hidden", {128, 128}}, {"train", train_defaults()}}},
          {"capture",
           {{"frames", 40},
            {"markers", oracle::kDefaultMarkers},
            {"actuation_seed", 100},
            {"noise_sigma", cap.noise_sigma},
            {"dropout",
             {{"enabled", cap.dropout.enabled}, {"base_rate", cap.dropout.base_rate}, {"slope", cap.dropout.slope}}},
            {"max_retries", cap.max_retries}}},
          {"s2r",
           {{"hidden", {24, 24}},
            {"c", rbf::kDefaultWidth},
            {"offset_scale", 1.0},
            {"linear_scale", 1e-2},
            {"beta_scale", 1.0},
            {"side_weight", 1.0},
            {"input_init_scale", 0.1},
            {"complete_only", false},
            {"train", train_defaults()}}},
          {"baseline", {{"hidden", {24, 24}}, {"c", rbf::kDefaultWidth}, {"train", train_defaults()}}},
          {"eval", {{"probes", 20}, {"probe_seed", 999}}},
          {"ik", ik::to_json(ik::IkConfig{})},
          {"target", {{"seed", 1}, {"grid", 40}, {"lo", 0.0}, {"hi", 1.0}, {"max_angle", 0.0}, {"max_shift", 0.0}}},
          {"audit",
           {{"gradcheck_probes", 50},
            {"gradcheck_samples", 300},
            {"gradcheck_tolerance", 1e-4},
            {"gradcost_trials", 5},
            {"gradcost_min_ratio", 2.0},
            {"ablation_epochs", 150}}}};
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw InputError("config: unknown key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  *node = std::move(value);
}

json load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  json cfg = default_config();
  if (file) {
    json user;
    try {
      user = io::read_json(*file);
    } catch (const Error& e) {
      throw InputError(std::string("config: ") + e.what());
    }
    if (!user.is_object()) throw InputError("config: top level must be an object");
    check_keys(user, cfg, "");
    cfg.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

std::uint64_t seed(const json& cfg) { return get<std::uint64_t>(cfg, "seed", "root"); }

oracle::MannequinConfig mannequin_config(const json& cfg) {
  const json& m = cfg.at("mannequin");
  if (m.is_string()) {
    if (m.get<std::string>() != "default") throw InputError("config: mannequin must be \"default\" or an object");
    return oracle::default_mannequin();
  }
  return oracle::mannequin_from_json(m);
}

oracle::GapConfig gap_config(const json& cfg) {
  const json& g = cfg.at("gap");
  if (g.is_string()) {
    const auto name = g.get<std::string>();
    if (name == "default") return oracle::default_gap();
    if (name == "identity") return oracle::GapConfig::identity();
    throw InputError("config: gap must be \"default\", \"identity\" or an object");
  }
  return oracle::gap_from_json(g);
}

fk::DatasetOptions dataset_options(const json& cfg) {
  const json& d = cfg.at("dataset");
  fk::DatasetOptions o;
  o.m = get<int>(d, "m", "dataset");
  o.n = get<int>(d, "n", "dataset");
  o.degree = get<int>(d, "degree", "dataset");
  o.include_corners = get<bool>(d, "include_corners", "dataset");
  o.halton_count = get<int>(d, "halton_count", "dataset");
  o.halton_skip = get<int>(d, "halton_skip", "dataset");
  o.ridge = get<double>(d, "ridge", "dataset");
  o.train_fraction = get<double>(d, "train_fraction", "dataset");
  o.seed = seed(cfg);
  o.validate();
  return o;
}

fk::FkTrainOptions fk_options(const json& cfg) {
  const json& f = cfg.at("fk");
  fk::FkTrainOptions o;
  o.target = fk::fk_target_from_string(get<std::string>(f, "target", "fk"));
  o.hidden = get<std::vector<int>>(f, "hidden", "fk");
  o.train = train_config(f.at("train"), seed(cfg), "fk.train");
  return o;
}

oracle::CaptureConfig capture_config(const json& cfg) {
  const json& c = cfg.at("capture");
  oracle::CaptureConfig o;
  o.noise_sigma = get<double>(c, "noise_sigma", "capture");
  o.max_retries = get<int>(c, "max_retries", "capture");
  const json& d = c.at("dropout");
  o.dropout.enabled = get<bool>(d, "enabled", "capture.dropout");
  o.dropout.base_rate = get<double>(d, "base_rate", "capture.dropout");
  o.dropout.slope = get<double>(d, "slope", "capture.dropout");
  if (!(o.noise_sigma >= 0.0)) throw InputError("config: capture.noise_sigma must be >= 0");
  if (o.max_retries < 0) throw InputError("config: capture.max_retries must be >= 0");
  return o;
}

sim2real::S2rOptions s2r_options(const json& cfg) {
  const json& s = cfg.at("s2r");
  sim2real::S2rOptions o;
  o.hidden = get<std::vector<int>>(s, "hidden", "s2r");
  o.c = get<double>(s, "c", "s2r");
  o.offset_scale = get<double>(s, "offset_scale", "s2r");
  o.linear_scale = get<double>(s, "linear_scale", "s2r");
  o.beta_scale = get<double>(s, "beta_scale", "s2r");
  o.side_weight = get<double>(s, "side_weight", "s2r");
  o.input_init_scale = get<double>(s, "input_init_scale", "s2r");
  o.train = train_config(s.at("train"), seed(cfg), "s2r.train");
  return o;
}

sim2real::MkOptions baseline_options(const json& cfg) {
  const json& b = cfg.at("baseline");
  sim2real::MkOptions o;
  o.hidden = get<std::vector<int>>(b, "hidden", "baseline");
  o.c = get<double>(b, "c", "baseline");
  o.train = train_config(b.at("train"), seed(cfg), "baseline.train");
  return o;
}

ik::IkConfig ik_config(const json& cfg) { return ik::ik_config_from_json(cfg.at("ik")); }

std::string history_csv(const std::vector<nn::EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,validation_loss\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.train_loss << ',';
    if (r.validation_loss == r.validation_loss) os << r.validation_loss;
    os << '\n';
  }
  return os.str();
}

}  // namespace surfkin::cli
