#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mvf/checkpoint.hpp"
#include "mvf/train.hpp"

using namespace mvf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const BackboneSpec kToySpec = BackboneSpec::custom({1, 1, 1, 1}, {4, 6, 8, 10}, 4, 1);

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("container round-trips bit-exactly") {
  const fs::path dir = fs::temp_directory_path() / "mvf_ckpt";
  fs::create_directories(dir);
  const std::string path = (dir / "w.bin").string();

  FusionModel<float> model({FusionType::MF, AggregationKind::Concatenate, {true, false}},
                           kToySpec, 77);
  // nudge running stats away from their init values
  Tensor<float> exam(4, 1, 16, 16), aux(4, 1, 16, 16);
  std::mt19937_64 rng(7);
  std::normal_distribution<float> d(0.f, 1.f);
  for (auto& v : exam.data) v = d(rng);
  for (auto& v : aux.data) v = d(rng);
  model.forward(exam, aux, true);

  save_model(model, path);
  const std::string bytes1 = slurp(path);

  FusionModel<float> loaded({FusionType::MF, AggregationKind::Concatenate, {true, false}},
                            kToySpec, 1234);
  load_model(loaded, path);
  auto p1 = model.parameters();
  auto p2 = loaded.parameters();
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].name == p2[i].name);
    CHECK(p1[i].value->bit_equal(*p2[i].value));
  }
  auto b1 = model.buffers();
  auto b2 = loaded.buffers();
  for (size_t i = 0; i < b1.size(); ++i) CHECK(b1[i].value->bit_equal(*b2[i].value));

  // loaded model reproduces outputs bit-exactly
  const Tensor<float> y1 = model.forward(exam, aux, false);
  const Tensor<float> y2 = loaded.forward(exam, aux, false);
  CHECK(y1.bit_equal(y2));

  // re-saving writes identical bytes
  save_model(loaded, path);
  CHECK(slurp(path) == bytes1);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint keys follow the block/layer/param grammar") {
  FusionModel<float> model({FusionType::MF}, kToySpec, 1);
  std::vector<std::string> names;
  for (auto& p : model.parameters()) names.push_back(p.name);
  const auto has = [&](const std::string& key) {
    return std::find(names.begin(), names.end(), key) != names.end();
  };
  CHECK(has("block1/layer0/conv/weight"));
  CHECK(has("block1/layer0/bn/scale"));
  CHECK(has("block2/layer0/conv1/weight"));
  CHECK(has("block5/layer0/bn2/shift"));
  CHECK(has("block3/layer0/down_conv/weight"));
  CHECK(has("fusion/proj/weight"));
  CHECK(has("fusion/proj/bias"));
  CHECK(has("fusion/bn/scale"));
  CHECK(has("head/fc/weight"));
  std::vector<std::string> buffer_names;
  for (auto& b : model.buffers()) buffer_names.push_back(b.name);
  CHECK(std::find(buffer_names.begin(), buffer_names.end(),
                  "block1/layer0/bn/running_mean") != buffer_names.end());
}

TEST_CASE("mismatched or corrupt checkpoints are rejected") {
  const fs::path dir = fs::temp_directory_path() / "mvf_ckpt_bad";
  fs::create_directories(dir);
  const std::string path = (dir / "w.bin").string();

  FusionModel<float> mf({FusionType::MF, AggregationKind::Concatenate}, kToySpec, 1);
  save_model(mf, path);

  // different fusion type: key sets differ in shape
  FusionModel<float> avg({FusionType::MF, AggregationKind::Average}, kToySpec, 1);
  CHECK_THROWS_AS(load_model(avg, path), DataError);

  std::ofstream(path, std::ios::binary | std::ios::trunc) << "not a checkpoint";
  CHECK_THROWS_AS(load_model(mf, path), DataError);
  CHECK_THROWS_AS(read_checkpoint((dir / "missing.bin").string()), DataError);
  fs::remove_all(dir);
}

}  // TEST_SUITE
