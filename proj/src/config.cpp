#include "mvf/config.hpp"

#include <fstream>
#include <set>

namespace mvf {

namespace {

void expect_keys(const Json& j, const std::string& where,
                 const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const Json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

void DataConfig::validate() const {
  if (manifest.has_value() == synthetic.has_value())
    throw ConfigError("data: exactly one of 'manifest' or 'synthetic' is required");
  if (synthetic) synthetic->validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("data.train_fraction must lie in (0, 1)");
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.data.synthetic = SynthSpec{};
  return c;
}

void ExperimentConfig::validate() const {
  train.validate();
  data.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
}

ExperimentConfig parse_experiment_config(const Json& j) {
  expect_keys(j, "config", {"fusion", "train", "data", "output_dir", "seeds"});
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.data = DataConfig{};  // source comes from the file

  if (j.contains("fusion")) {
    const Json& f = j.at("fusion");
    expect_keys(f, "fusion",
                {"type", "aggregation", "skip_examined", "skip_auxiliary", "depth"});
    if (f.contains("type")) {
      if (!f.at("type").is_string()) throw ConfigError("fusion.type: expected a string");
      cfg.fusion.fusion_type = fusion_type_from_string(f.at("type").get<std::string>());
    }
    if (f.contains("aggregation")) {
      if (!f.at("aggregation").is_string())
        throw ConfigError("fusion.aggregation: expected a string");
      cfg.fusion.aggregation =
          aggregation_from_string(f.at("aggregation").get<std::string>());
    }
    cfg.fusion.skip.examined = get_or(f, "skip_examined", "fusion", false);
    cfg.fusion.skip.auxiliary = get_or(f, "skip_auxiliary", "fusion", false);
    if (f.contains("depth")) {
      const Json& d = f.at("depth");
      if (d.is_number_integer())
        cfg.fusion.depth = depth_from_string(std::to_string(d.get<int>()));
      else if (d.is_string())
        cfg.fusion.depth = depth_from_string(d.get<std::string>());
      else
        throw ConfigError("fusion.depth: expected 18 or 34");
    }
  }

  if (j.contains("train")) {
    const Json& t = j.at("train");
    expect_keys(t, "train",
                {"preset", "epochs", "lr0", "decay_factor", "decay_epochs", "momentum",
                 "batch_cases", "image_size", "seed", "focal"});
    if (t.contains("preset")) {
      const auto preset = t.at("preset").get<std::string>();
      if (preset == "paper") cfg.train = TrainConfig::paper_preset();
      else if (preset == "desk") cfg.train = TrainConfig::desk_preset();
      else throw ConfigError("train.preset: expected 'paper' or 'desk'");
    }
    cfg.train.epochs = get_or(t, "epochs", "train", cfg.train.epochs);
    cfg.train.lr0 = get_or(t, "lr0", "train", cfg.train.lr0);
    cfg.train.decay_factor = get_or(t, "decay_factor", "train", cfg.train.decay_factor);
    cfg.train.decay_epochs =
        get_or(t, "decay_epochs", "train", cfg.train.decay_epochs);
    cfg.train.momentum = get_or(t, "momentum", "train", cfg.train.momentum);
    cfg.train.batch_cases = get_or(t, "batch_cases", "train", cfg.train.batch_cases);
    cfg.train.image_size = get_or(t, "image_size", "train", cfg.train.image_size);
    cfg.train.seed = get_or(t, "seed", "train", cfg.train.seed);
    if (t.contains("focal")) {
      const Json& fl = t.at("focal");
      expect_keys(fl, "train.focal", {"gamma", "alpha"});
      cfg.train.loss.gamma = get_or(fl, "gamma", "train.focal", cfg.train.loss.gamma);
      if (fl.contains("alpha")) {
        const Json& a = fl.at("alpha");
        if (a.is_string() && a.get<std::string>() == "auto") {
          cfg.train.alpha_auto = true;
        } else if (a.is_array()) {
          cfg.train.alpha_auto = false;
          cfg.train.loss.alpha = a.get<std::vector<double>>();
        } else {
          throw ConfigError("train.focal.alpha: expected \"auto\" or an array");
        }
      }
    }
  }

  if (j.contains("data")) {
    const Json& d = j.at("data");
    expect_keys(d, "data",
                {"manifest", "synthetic", "train_fraction", "split_seed",
                 "examined_view", "zero_auxiliary"});
    if (d.contains("manifest"))
      cfg.data.manifest = d.at("manifest").get<std::string>();
    if (d.contains("synthetic")) {
      const Json& s = d.at("synthetic");
      expect_keys(s, "data.synthetic",
                  {"n_cases", "image_size", "positive_rate", "view_scramble_seed",
                   "noise_level"});
      SynthSpec spec;
      spec.n_cases = get_or(s, "n_cases", "data.synthetic", spec.n_cases);
      spec.image_size = get_or(s, "image_size", "data.synthetic", spec.image_size);
      spec.positive_rate =
          get_or(s, "positive_rate", "data.synthetic", spec.positive_rate);
      spec.view_scramble_seed =
          get_or(s, "view_scramble_seed", "data.synthetic", spec.view_scramble_seed);
      spec.noise_level = get_or(s, "noise_level", "data.synthetic", spec.noise_level);
      cfg.data.synthetic = spec;
    }
    cfg.data.train_fraction =
        get_or(d, "train_fraction", "data", cfg.data.train_fraction);
    cfg.data.split_seed = get_or(d, "split_seed", "data", cfg.data.split_seed);
    if (d.contains("examined_view")) {
      const auto v = d.at("examined_view").get<std::string>();
      if (v == "CC") cfg.data.examined_view = View::CC;
      else if (v == "MLO") cfg.data.examined_view = View::MLO;
      else throw ConfigError("data.examined_view: expected 'CC' or 'MLO'");
    }
    cfg.data.zero_auxiliary = get_or(d, "zero_auxiliary", "data", false);
  } else {
    cfg.data.synthetic = SynthSpec{};
  }

  cfg.output_dir = get_or(j, "output_dir", "config", cfg.output_dir);
  cfg.seeds = get_or(j, "seeds", "config", cfg.seeds);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["fusion"] = {{"type", to_string(cfg.fusion.fusion_type)},
                 {"aggregation", to_string(cfg.fusion.aggregation)},
                 {"skip_examined", cfg.fusion.skip.examined},
                 {"skip_auxiliary", cfg.fusion.skip.auxiliary},
                 {"depth", cfg.fusion.depth == Depth::R18 ? 18 : 34}};
  Json focal;
  focal["gamma"] = cfg.train.loss.gamma;
  if (cfg.train.alpha_auto) focal["alpha"] = "auto";
  else focal["alpha"] = cfg.train.loss.alpha;
  j["train"] = {{"epochs", cfg.train.epochs},
                {"lr0", cfg.train.lr0},
                {"decay_factor", cfg.train.decay_factor},
                {"decay_epochs", cfg.train.decay_epochs},
                {"momentum", cfg.train.momentum},
                {"batch_cases", cfg.train.batch_cases},
                {"image_size", cfg.train.image_size},
                {"seed", cfg.train.seed},
                {"focal", focal}};
  Json data;
  if (cfg.data.manifest) data["manifest"] = *cfg.data.manifest;
  if (cfg.data.synthetic) {
    data["synthetic"] = {{"n_cases", cfg.data.synthetic->n_cases},
                         {"image_size", cfg.data.synthetic->image_size},
                         {"positive_rate", cfg.data.synthetic->positive_rate},
                         {"view_scramble_seed", cfg.data.synthetic->view_scramble_seed},
                         {"noise_level", cfg.data.synthetic->noise_level}};
  }
  data["train_fraction"] = cfg.data.train_fraction;
  data["split_seed"] = cfg.data.split_seed;
  data["examined_view"] = cfg.data.examined_view == View::CC ? "CC" : "MLO";
  data["zero_auxiliary"] = cfg.data.zero_auxiliary;
  j["data"] = data;
  j["output_dir"] = cfg.output_dir;
  j["seeds"] = cfg.seeds;
  return j;
}

}  // namespace mvf
