#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vilab/model.hpp"
#include "vilab/rng.hpp"
#include "vilab/tensor.hpp"

namespace vilab {

/// In-memory dataset: features [n x k] plus either integer labels or real
/// targets, mirroring the CSV layout (header f0..f{k-1}, final column
/// "label" or "target").
struct Dataset {
  RowMat features;
  std::vector<int> labels;  // classification
  RowMat targets;           // regression [n x 1]
  bool classification = true;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  Eigen::Index num_classes() const;
};

Batch make_batch(const Dataset& data, const std::vector<int>& idx);
Batch full_batch(const Dataset& data);

Dataset load_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

enum class DataKind { two_moons, xor_blobs, blobs, label_noise };

DataKind data_kind_from_name(const std::string& s);
const char* data_kind_name(DataKind k);

struct GenSpec {
  DataKind kind = DataKind::two_moons;
  int n = 1000;
  std::uint64_t seed = 0;
  double noise_rate = 0.0;  // label_noise: flip probability, in [0, 0.5)
};

/// Deterministic synthetic 2-d classification data with a stratified 80/20
/// train/test split. label_noise draws two-moons and then flips each label
/// independently with the given rate (in both splits: the noise is part of
/// the data distribution).
std::pair<Dataset, Dataset> gen_data(const GenSpec& spec);

}  // namespace vilab
