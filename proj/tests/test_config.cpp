#include <doctest.h>

#include "mvf/config.hpp"

using namespace mvf;

TEST_SUITE("config") {

TEST_CASE("defaults parse back to themselves") {
  const ExperimentConfig def = ExperimentConfig::defaults();
  const Json j = to_json(def);
  const ExperimentConfig round = parse_experiment_config(j);
  CHECK(to_json(round) == j);
  CHECK(round.train.epochs == 30);
  CHECK(round.train.decay_epochs == std::vector<int>{10, 20});
  CHECK(round.fusion.fusion_type == FusionType::MF);
  CHECK(round.data.synthetic.has_value());
}

TEST_CASE("unknown fusion type names the field") {
  Json j = to_json(ExperimentConfig::defaults());
  j["fusion"]["type"] = "Sideways";
  CHECK_THROWS_WITH_AS(parse_experiment_config(j), doctest::Contains("fusion.type"),
                       ConfigError);
}

TEST_CASE("unknown keys are rejected") {
  Json j = to_json(ExperimentConfig::defaults());
  j["trian"] = Json::object();
  CHECK_THROWS_WITH_AS(parse_experiment_config(j), doctest::Contains("trian"),
                       ConfigError);
  Json j2 = to_json(ExperimentConfig::defaults());
  j2["train"]["learning_rate"] = 0.1;
  CHECK_THROWS_WITH_AS(parse_experiment_config(j2),
                       doctest::Contains("learning_rate"), ConfigError);
}

TEST_CASE("data source must be exactly one of manifest or synthetic") {
  Json j = to_json(ExperimentConfig::defaults());
  j["data"]["manifest"] = "somewhere.csv";  // both present now
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  Json j2 = to_json(ExperimentConfig::defaults());
  j2["data"].erase("synthetic");
  CHECK_THROWS_AS(parse_experiment_config(j2), ConfigError);
}

TEST_CASE("focal alpha accepts auto or explicit weights") {
  Json j = to_json(ExperimentConfig::defaults());
  j["train"]["focal"]["alpha"] = {0.3, 0.7};
  const ExperimentConfig cfg = parse_experiment_config(j);
  CHECK_FALSE(cfg.train.alpha_auto);
  CHECK(cfg.train.loss.alpha == std::vector<double>{0.3, 0.7});

  j["train"]["focal"]["alpha"] = "auto";
  CHECK(parse_experiment_config(j).train.alpha_auto);

  j["train"]["focal"]["alpha"] = 5;
  CHECK_THROWS_WITH_AS(parse_experiment_config(j),
                       doctest::Contains("train.focal.alpha"), ConfigError);
}

TEST_CASE("presets fill the protocol fields") {
  Json j;
  j["train"] = {{"preset", "paper"}};
  const ExperimentConfig cfg = parse_experiment_config(j);
  CHECK(cfg.train.epochs == 200);
  CHECK(cfg.train.image_size == 800);
  CHECK(cfg.train.decay_epochs == std::vector<int>{20, 40, 60, 80});
  CHECK(cfg.train.lr0 == 1e-3);
  CHECK(cfg.train.momentum == 0.9);
  CHECK(cfg.train.batch_cases == 16);

  Json j2;
  j2["train"] = {{"preset", "desk"}, {"epochs", 5}};
  CHECK(parse_experiment_config(j2).train.epochs == 5);  // flags override presets
}

TEST_CASE("bad enum values elsewhere name their fields") {
  Json j = to_json(ExperimentConfig::defaults());
  j["fusion"]["depth"] = 50;
  CHECK_THROWS_WITH_AS(parse_experiment_config(j), doctest::Contains("depth"),
                       ConfigError);
  Json j2 = to_json(ExperimentConfig::defaults());
  j2["data"]["examined_view"] = "CCC";
  CHECK_THROWS_WITH_AS(parse_experiment_config(j2),
                       doctest::Contains("examined_view"), ConfigError);
  Json j3 = to_json(ExperimentConfig::defaults());
  j3["data"]["synthetic"]["positive_rate"] = 0.0;
  CHECK_THROWS_WITH_AS(parse_experiment_config(j3),
                       doctest::Contains("positive_rate"), ConfigError);
}

}  // TEST_SUITE
