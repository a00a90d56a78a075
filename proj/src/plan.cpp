#include "mvf/plan.hpp"

#include <algorithm>

namespace mvf {

BackboneSpec BackboneSpec::resnet18(int input_channels) {
  BackboneSpec s;
  s.depth = Depth::R18;
  s.stage_block_counts = {2, 2, 2, 2};
  s.stage_widths = {64, 128, 256, 512};
  s.stem_width = 64;
  s.input_channels = input_channels;
  s.validate();
  return s;
}

BackboneSpec BackboneSpec::resnet34(int input_channels) {
  BackboneSpec s;
  s.depth = Depth::R34;
  s.stage_block_counts = {3, 4, 6, 3};
  s.stage_widths = {64, 128, 256, 512};
  s.stem_width = 64;
  s.input_channels = input_channels;
  s.validate();
  return s;
}

BackboneSpec BackboneSpec::from_depth(Depth d, int input_channels) {
  return d == Depth::R18 ? resnet18(input_channels) : resnet34(input_channels);
}

BackboneSpec BackboneSpec::custom(std::vector<int> block_counts,
                                  std::vector<int> widths, int stem_width,
                                  int input_channels) {
  BackboneSpec s;
  s.stage_block_counts = std::move(block_counts);
  s.stage_widths = std::move(widths);
  s.stem_width = stem_width;
  s.input_channels = input_channels;
  if (s.stage_block_counts.size() != 4 || s.stage_widths.size() != 4)
    throw ConfigError("backbone spec needs 4 stages");
  for (int n : s.stage_block_counts)
    if (n < 1) throw ConfigError("stage block counts must be positive");
  for (int w : s.stage_widths)
    if (w < 1) throw ConfigError("stage widths must be positive");
  if (s.stem_width < 1 || s.input_channels < 1)
    throw ConfigError("stem width and input channels must be positive");
  return s;
}

void BackboneSpec::validate() const {
  const std::vector<int> expect =
      depth == Depth::R18 ? std::vector<int>{2, 2, 2, 2} : std::vector<int>{3, 4, 6, 3};
  if (stage_block_counts != expect)
    throw ConfigError("stage block counts do not match depth");
  if (stage_widths != std::vector<int>{64, 128, 256, 512})
    throw ConfigError("stage widths must be 64/128/256/512");
  if (stem_width != 64) throw ConfigError("stem width must be 64");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
}

NetworkPlan plan_network(const FusionConfig& config, const BackboneSpec& spec) {
  NetworkPlan plan;
  int split = 0;  // number of blocks assigned to the coarse side
  switch (config.fusion_type) {
    case FusionType::PreF: split = 0; break;
    case FusionType::EF: split = 1; break;
    case FusionType::MF: split = 3; break;
    case FusionType::LF: split = 5; break;
    case FusionType::PostF: split = 5; break;
    default: throw ConfigError("unknown fusion type");
  }
  for (int b = 1; b <= split; ++b) plan.coarse_blocks.push_back(b);
  for (int b = split + 1; b <= 5; ++b) plan.fine_blocks.push_back(b);

  // Per-view width at the split: blocks feed widths
  // [stem, w0, w1, w2, w3] after blocks 1..5.
  auto width_after = [&](int block) {
    return block == 1 ? spec.stem_width : spec.stage_widths[block - 2];
  };
  // Spatial shrink vs. input: stem /4, then /2 at each of stages 3..5.
  auto shrink_after = [&](int block) {
    int f = 4;
    for (int b = 3; b <= block; ++b) f *= 2;
    return f;
  };

  if (config.fusion_type == FusionType::PreF) {
    plan.fusion_site = {FusionSiteKind::ImageLevel, spec.input_channels, 1};
  } else if (config.fusion_type == FusionType::PostF) {
    plan.fusion_site = {FusionSiteKind::FlattenedVector, width_after(5), 0};
    plan.pool_in_coarse = true;
  } else {
    plan.fusion_site = {FusionSiteKind::FeatureMap, width_after(split),
                        shrink_after(split)};
  }
  return plan;
}

std::string to_string(FusionType t) {
  switch (t) {
    case FusionType::PreF: return "PreF";
    case FusionType::EF: return "EF";
    case FusionType::MF: return "MF";
    case FusionType::LF: return "LF";
    case FusionType::PostF: return "PostF";
  }
  return "?";
}

std::string to_string(AggregationKind k) {
  return k == AggregationKind::Average ? "average" : "concatenate";
}

std::string to_string(Depth d) { return d == Depth::R18 ? "18" : "34"; }

FusionType fusion_type_from_string(const std::string& s) {
  if (s == "PreF") return FusionType::PreF;
  if (s == "EF") return FusionType::EF;
  if (s == "MF") return FusionType::MF;
  if (s == "LF") return FusionType::LF;
  if (s == "PostF") return FusionType::PostF;
  throw ConfigError("fusion.type: unknown fusion type '" + s +
                    "' (expected PreF|EF|MF|LF|PostF)");
}

AggregationKind aggregation_from_string(const std::string& s) {
  if (s == "average" || s == "avg") return AggregationKind::Average;
  if (s == "concatenate" || s == "concat") return AggregationKind::Concatenate;
  throw ConfigError("fusion.aggregation: unknown aggregation '" + s +
                    "' (expected average|concatenate)");
}

Depth depth_from_string(const std::string& s) {
  if (s == "18" || s == "R18" || s == "resnet18") return Depth::R18;
  if (s == "34" || s == "R34" || s == "resnet34") return Depth::R34;
  throw ConfigError("fusion.depth: unknown depth '" + s + "' (expected 18|34)");
}

}  // namespace mvf
