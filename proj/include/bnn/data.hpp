#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bnn/model.hpp"

namespace bnn {

// Synthetic 1D regression from a randomly drawn teacher network. Network
// inputs are the pair (x, x^2).
struct SyntheticRegressionConfig {
  std::vector<std::pair<double, double>> intervals = {
      {-10.0, -6.0}, {6.0, 10.0}, {14.0, 18.0}};
  int points_per_interval = 40;
  std::vector<int> teacher_hidden = {100, 100, 100};
  double teacher_weight_std = 0.1;
  double noise_std = 0.02;
  std::uint64_t seed = 0;
};

struct TeacherFunction {
  ModelSpec spec;
  ParameterVector params;

  double operator()(double x) const;
};

struct SyntheticRegression {
  Dataset train;
  TeacherFunction teacher;
};

SyntheticRegression gen_synthetic_regression(const SyntheticRegressionConfig& cfg);

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  int index = 0;  // which of the random splits
};

// Train-fit z-score standardization of inputs and target, with
// de-standardization for reporting in original units.
struct Standardizer {
  Eigen::RowVectorXd input_mean, input_std;
  double target_mean = 0.0, target_std = 1.0;

  Dataset standardize(const Dataset& data) const;
  double destandardize_target(double standardized) const;
  double destandardize_scale(double standardized_std) const;
};

struct RegressionSplit {
  Dataset train, test;          // standardized
  Dataset train_raw, test_raw;  // original units
  Standardizer standardizer;    // fit on train_raw
};

// Delimited numeric text, last column = target. delimiter 0 = any whitespace
// or comma. Malformed rows are reported with their 1-based line number.
Dataset load_regression_table(const std::filesystem::path& path,
                              char delimiter = 0);

RegressionSplit split_standardize(const Dataset& full, const SplitSpec& split);

RegressionSplit load_uci(const std::filesystem::path& path,
                         const SplitSpec& split, char delimiter = 0);

// Adds iid N(0, sigma^2) noise to the input features; labels/targets untouched.
Dataset corrupt_gaussian(const Dataset& data, double sigma, std::uint64_t seed);

// Vectorized classification container: u64 header (n, d, num_classes), then
// n * d little-endian doubles row-major, then n u16 labels.
Dataset load_classification(const std::filesystem::path& path,
                            int* num_classes = nullptr);
void save_classification(const std::filesystem::path& path, const Dataset& data,
                         int num_classes);

}  // namespace bnn
