#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmmvh/linalg.hpp"

namespace dmmvh {

// One sample: one feature vector per view plus a multi-hot label over C categories.
struct FeatureRecord {
  std::string id;
  std::vector<Vector> views;
  Vector label;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct DatasetSplit {
  std::vector<std::size_t> view_dims;
  std::size_t categories = 0;
  std::vector<FeatureRecord> train;
  std::vector<FeatureRecord> retrieval;
  std::vector<FeatureRecord> query;
  // True when query records are also present in the retrieval list (matched by id).
  bool query_in_retrieval = false;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct SynthConfig {
  std::size_t categories = 4;
  std::size_t views = 2;
  std::vector<std::size_t> view_dims = {64, 64};
  std::size_t train_size = 800;
  std::size_t retrieval_size = 800;
  std::size_t query_size = 200;
  // Per-component Gaussian noise around the (unit-norm) category anchors.
  double sigma = 0.1;
  // Probability that a sample carries a second category.
  double multi_label_prob = 0.0;
  // When set, each view only resolves part of the category identity: view v sees
  // digit v of the category index in a mixed radix, so no single view separates
  // every category but all views together do.
  bool complementary_views = false;
  // Norm of a random direction added to every sample of a view. Distances, and so
  // nearest-neighbour structure, are unaffected.
  double common_offset = 0.0;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);

DatasetSplit generate_synthetic(const SynthConfig& cfg);

// Anchor group seen by `view` for `category` (identity unless complementary_views).
std::size_t anchor_group(const SynthConfig& cfg, std::size_t view, std::size_t category);

// Reads a manifest plus the per-split tensor and label files it references.
// Throws IoError with a message naming the offending file or record.
DatasetSplit load_features(const std::filesystem::path& manifest_path);

// Writes `split` as manifest + tensor + label files into `dir`; returns the manifest path.
// Feature values are stored as 32-bit floats.
std::filesystem::path write_features(const DatasetSplit& split, const std::filesystem::path& dir);

// Validates ids, dimensions, labels and finiteness of one record list.
void validate_records(const std::vector<FeatureRecord>& records,
                      const std::vector<std::size_t>& view_dims, std::size_t categories,
                      const std::string& split_name);

using Batch = std::vector<FeatureRecord>;

// Shuffles `records` with a generator seeded from (seed, epoch) and cuts consecutive
// full batches; a trailing short batch is dropped.
std::vector<Batch> batches(const std::vector<FeatureRecord>& records, std::size_t batch_size,
                           std::uint64_t seed, std::uint64_t epoch);

// Same shuffle as `batches`, returned as the permutation of record positions.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch);

// Labels of a batch stacked as rows.
Matrix label_matrix(const std::vector<FeatureRecord>& records);

// splitmix64 finalizer, used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace dmmvh
