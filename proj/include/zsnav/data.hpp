#pragma once

#include "zsnav/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace zsnav {

struct ClassSplit {
  std::vector<std::string> seen;
  std::vector<std::string> unseen;
};

// Instances in feature space with a seen/unseen class split. Seen-class
// instances form the training partition, unseen-class instances the test one.
struct FeatureDataset {
  Matrix instances;  // one row per instance
  std::vector<std::string> instance_ids;
  std::vector<int> class_of;
  std::vector<std::string> class_names;
  std::vector<int> seen_classes;    // ascending
  std::vector<int> unseen_classes;  // ascending
  std::vector<std::string> image_paths;  // empty, or one per instance

  Index size() const { return instances.rows(); }
  Index dim() const { return instances.cols(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }

  bool is_seen(int cls) const;
  bool is_unseen(int cls) const;
  int class_index(const std::string& name) const;  // -1 when unknown

  std::vector<Index> training_indices() const;
  std::vector<Index> test_indices() const;
  std::vector<Index> instances_of(int cls) const;

  // Throws on any broken invariant.
  void validate() const;
};

// Binary class x attribute table keyed by class name.
struct NamedBinaryTable {
  std::vector<std::string> row_names;
  std::vector<std::string> attribute_names;
  IntMatrix values;
};

// Ground truth used by the synthetic generator and the simulated oracle.
// Rows follow the dataset's class order.
struct GroundTruthMatrix {
  IntMatrix values;
  std::vector<std::string> attribute_names;

  Index n_attributes() const { return values.cols(); }
};

ClassSplit read_split(const std::filesystem::path& path);
void write_split(const std::filesystem::path& path, const ClassSplit& split);

// CSV (`instance_id,class_name,f0,...`) or, for a `.bin` path, little-endian
// float32 rows plus a `.json` manifest next to it.
FeatureDataset load_feature_table(const std::filesystem::path& path, const ClassSplit& split);
FeatureDataset parse_feature_csv(const std::string& text, const ClassSplit& split);
std::string format_feature_csv(const FeatureDataset& dataset);
void write_feature_table(const std::filesystem::path& path, const FeatureDataset& dataset);
void write_feature_binary(const std::filesystem::path& path, const FeatureDataset& dataset);

NamedBinaryTable read_binary_table(const std::filesystem::path& path);
NamedBinaryTable parse_binary_table(const std::string& text);
std::string format_binary_table(const NamedBinaryTable& table);

// Reorders a named table to the dataset's class order; every class must be present.
GroundTruthMatrix align_ground_truth(const NamedBinaryTable& table, const FeatureDataset& dataset);
NamedBinaryTable to_named_table(const GroundTruthMatrix& gt, const FeatureDataset& dataset);

struct SyntheticParams {
  std::uint64_t seed = 0;
  int n_classes = 50;
  int n_seen = 40;
  int gt_attributes = 20;
  Index dim = 256;
  int per_class = 50;
  double noise = 0.1;
  // Scale of the attribute signal; <= 0 selects 5 * noise (or 1 when noise is 0).
  double signal_scale = 0.0;
  // Per-class offset not explained by attributes, relative to the signal scale.
  double class_offset = 0.5;
};

struct SyntheticData {
  FeatureDataset dataset;
  GroundTruthMatrix ground_truth;
  Matrix centers;  // one row per class
};

SyntheticData generate_synthetic(const SyntheticParams& params);

// Shortest round-trip decimal representation.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace zsnav
