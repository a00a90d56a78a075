#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvf/image.hpp"
#include "mvf/tensor.hpp"

namespace mvf {

enum class Split { Train, Test, Unassigned };
enum class View { CC, MLO };

/// One breast: both views, binary label, identifiers.
struct IpsilateralCase {
  std::string patient_id;
  char side = 'L';  // 'L' or 'R'
  ImageU8 examined;
  ImageU8 auxiliary;
  int label = 0;  // 0 = benign, 1 = suspicious/malignant
  Split split = Split::Unassigned;
};

/// Desk-scale synthetic cross-view dataset. Each view carries a hidden bit
/// rendered as a view-specific glyph under a fixed per-view pixel scrambling;
/// the label is the XOR of the two bits, so no single view determines it.
struct SynthSpec {
  int n_cases = 100;
  int image_size = 64;
  double positive_rate = 0.5;
  uint64_t view_scramble_seed = 7;
  double noise_level = 0.0;

  void validate() const;
};

/// CSV manifest `patient_id,side,view,image_path,label,split` (split column
/// optional). Every (patient_id, side, split) group must contain exactly one
/// CC and one MLO row with equal labels. Image paths resolve relative to the
/// manifest's directory.
std::vector<IpsilateralCase> load_manifest(const std::string& path,
                                           int target_size,
                                           View examined_view = View::CC);

/// Case-granularity stratified split; per-class proportions preserved within
/// one case, deterministic for a fixed seed. Pairs are never separated.
std::pair<std::vector<IpsilateralCase>, std::vector<IpsilateralCase>>
stratified_split(const std::vector<IpsilateralCase>& cases,
                 double train_fraction, uint64_t seed);

/// Index batches of at most batch_cases cases each (a full default batch of
/// 16 cases carries 32 images). Order is deterministic for a fixed seed.
std::vector<std::vector<int>> make_batches(int n_cases, int batch_cases,
                                           uint64_t seed, bool shuffle);

/// Stable per-epoch shuffle seed derivation.
uint64_t epoch_seed(uint64_t seed, int epoch);

std::vector<IpsilateralCase> generate_synthetic(const SynthSpec& spec);

/// Swaps the examined/auxiliary role assignment in place.
void swap_roles(std::vector<IpsilateralCase>& cases);

/// Writes images (PGM) plus manifest.csv for a generated case list.
void write_dataset(const std::vector<IpsilateralCase>& cases,
                   const std::string& out_dir);

/// Standardized float views ready for the network.
struct PreparedCase {
  Tensor<float> examined, auxiliary;
  int label = 0;
};

struct PreparedDataset {
  std::vector<PreparedCase> train, test;
  int image_size = 0;
  double pixel_mean = 0.0, pixel_std = 1.0;  // computed on the training split
};

/// Resizes, scales to [0,1] and standardizes with training-split statistics.
/// zero_auxiliary blanks the auxiliary view (single-view ablation).
PreparedDataset prepare_dataset(const std::vector<IpsilateralCase>& train,
                                const std::vector<IpsilateralCase>& test,
                                int image_size, bool zero_auxiliary = false);

struct BatchTensors {
  Tensor<float> examined, auxiliary;
  std::vector<int> labels;
};

BatchTensors assemble_batch(const std::vector<PreparedCase>& cases,
                            const std::vector<int>& indices);

}  // namespace mvf
