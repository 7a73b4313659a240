#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bnn/evaluate.hpp"
#include "bnn/model.hpp"
#include "bnn/sample_store.hpp"

namespace bnn {

// M chains x N iterations of one scalar functional of the chain state.
struct ScalarChains {
  Matrix values;

  Eigen::Index n_chains() const { return values.rows(); }
  Eigen::Index n_iterations() const { return values.cols(); }
};

// Classic Gelman-Rubin potential scale reduction:
//   B/N between-chain, W within-chain variance,
//   sigma2_plus = ((N-1)/N) W + B/N,
//   rhat = ((M+1)/M)(sigma2_plus / W) - (N-1)/(M N).
// Returns nullopt when W = 0 (every chain internally constant).
std::optional<double> rhat(const ScalarChains& chains);

// Fixed qualitative bands used for report histograms.
inline constexpr std::array<double, 4> kRhatBinEdges = {1.0, 1.1, 1.5, 5.0};
inline constexpr int kRhatBinCount = 5;

struct RhatReport {
  std::vector<std::optional<double>> values;  // nullopt = undefined (W = 0)
  std::array<Eigen::Index, kRhatBinCount> histogram{};  // bands of kRhatBinEdges
  Eigen::Index n_undefined = 0;
  double fraction_below_1p1 = 0.0;  // of the defined values

  std::string to_csv() const;   // index, rhat ("undefined" when W = 0)
  std::string to_json() const;  // fractions + histogram summary
};

RhatReport make_report(const std::vector<std::optional<double>>& values);

// One rhat per parameter coordinate, chains = stores.
RhatReport rhat_weights(const std::vector<SampleStore>& stores);

// One rhat per (test input, class) softmax probability. The per-(input,class)
// values are laid out input-major; `classes_per_input` lets callers aggregate.
struct FunctionRhatReport {
  RhatReport per_probability;
  RhatReport per_input;  // aggregated: max over the classes of each input
  int classes_per_input = 0;
};
FunctionRhatReport rhat_functions(const std::vector<SampleStore>& stores,
                                  const ModelSpec& model, const Matrix& inputs);

struct MarginalStdReport {
  Vector stds;  // one per parameter
  std::vector<Eigen::Index> histogram;
  std::vector<double> bin_edges;
};
MarginalStdReport marginal_std(const SampleStore& store, int n_bins = 30);

enum class BurninMetric { Accuracy, Nll };

struct BurninPoint {
  Eigen::Index n_burnin = 0;
  double bma_value = 0.0;         // metric of the first `window` post-discard samples
  double individual_value = 0.0;  // metric of the single sample at that iteration
};

// Fig.-4-style trace: for each n_bi, the BMA metric over samples
// [n_bi, n_bi + window) and the single-sample metric at iteration n_bi.
std::vector<BurninPoint> burnin_trace(const SampleStore& store,
                                      const ModelSpec& model,
                                      const Dataset& test,
                                      BurninMetric metric,
                                      const std::vector<Eigen::Index>& grid,
                                      Eigen::Index window = 100);

}  // namespace bnn
