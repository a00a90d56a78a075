#pragma once

#include <string>
#include <vector>

#include "mvf/errors.hpp"

namespace mvf {

/// The five split positions: before block 1, after block 1, after block 3,
/// after block 5, and after pooling/flatten.
enum class FusionType { PreF, EF, MF, LF, PostF };

enum class AggregationKind { Average, Concatenate };

/// Element-wise addition of a view's coarse output onto the fusion-block
/// output. All four combinations are legal.
struct SkipFlags {
  bool examined = false;
  bool auxiliary = false;
};

enum class Depth { R18, R34 };

struct FusionConfig {
  FusionType fusion_type = FusionType::MF;
  AggregationKind aggregation = AggregationKind::Concatenate;
  SkipFlags skip;
  Depth depth = Depth::R18;
};

/// Backbone geometry. Block 1 is the stem (7x7 conv, norm, rectification,
/// stride-2 max pool); blocks 2..5 are the residual stages.
struct BackboneSpec {
  Depth depth = Depth::R18;
  std::vector<int> stage_block_counts;  // 4 entries
  std::vector<int> stage_widths;        // 4 entries
  int stem_width = 64;
  int input_channels = 1;

  static BackboneSpec resnet18(int input_channels = 1);
  static BackboneSpec resnet34(int input_channels = 1);
  static BackboneSpec from_depth(Depth d, int input_channels = 1);

  /// Unvalidated geometry for toy-scale tests and gradient checking.
  static BackboneSpec custom(std::vector<int> block_counts,
                             std::vector<int> widths, int stem_width,
                             int input_channels);

  void validate() const;
};

enum class FusionSiteKind { ImageLevel, FeatureMap, FlattenedVector };

struct FusionSite {
  FusionSiteKind kind = FusionSiteKind::FeatureMap;
  int channels = 0;           // per-view width entering the fusion block
  int downsample_factor = 1;  // spatial shrink vs. the input image (FeatureMap)
};

/// Resolved split of the five blocks into Coarse Layer and Fine Layer.
struct NetworkPlan {
  std::vector<int> coarse_blocks;  // subset of 1..5, ordered
  std::vector<int> fine_blocks;    // the complement, ordered
  FusionSite fusion_site;
  bool pool_in_coarse = false;  // PostF: pool+flatten belong to the coarse side
};

NetworkPlan plan_network(const FusionConfig& config, const BackboneSpec& spec);

std::string to_string(FusionType t);
std::string to_string(AggregationKind k);
std::string to_string(Depth d);
FusionType fusion_type_from_string(const std::string& s);
AggregationKind aggregation_from_string(const std::string& s);
Depth depth_from_string(const std::string& s);

}  // namespace mvf
