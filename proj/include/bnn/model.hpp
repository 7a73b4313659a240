#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace bnn {

using ParameterVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, Relu, Swish };

enum class HeadKind {
  // two outputs per input: predictive mean and pre-softplus std
  RegressionMeanStd,
  // one output per input: predictive mean, noise std fixed in the spec
  RegressionFixedStd,
  Classification,
};

// Fully-connected architecture. Parameter packing is layer-major: for each
// layer (first hidden layer first) the weight matrix in row-major (out x in)
// order, then the bias vector.
struct ModelSpec {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  Activation activation = Activation::Swish;
  HeadKind head = HeadKind::RegressionMeanStd;
  int num_classes = 2;          // classification only
  double fixed_noise_std = 1.0; // RegressionFixedStd only

  int output_dim() const;
  bool is_classification() const { return head == HeadKind::Classification; }
  void validate() const;
};

struct Dataset {
  Matrix inputs;            // n x input_dim
  Vector targets;           // regression
  std::vector<int> labels;  // classification
  std::string name;

  Eigen::Index size() const { return inputs.rows(); }
  bool is_classification() const { return !labels.empty(); }
  void validate() const;
};

std::int64_t param_count(const ModelSpec& spec);

ParameterVector init_params(const ModelSpec& spec, double scale,
                            std::uint64_t seed);

// Raw head outputs, n x output_dim. Classification: logits. Regression:
// (mu, rho) with sigma = softplus(rho) + 1e-6 applied by the likelihood.
Matrix forward(const ModelSpec& spec, const ParameterVector& params,
               const Matrix& inputs);

constexpr double kSigmaFloor = 1e-6;

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

// Predictive (mean, std) rows for the regression heads.
Matrix forward_mean_std(const ModelSpec& spec, const ParameterVector& params,
                        const Matrix& inputs);

double log_likelihood(const ModelSpec& spec, const ParameterVector& params,
                      const Dataset& data);

ParameterVector grad_log_likelihood(const ModelSpec& spec,
                                    const ParameterVector& params,
                                    const Dataset& data);

// One fused forward/backward pass over rows [begin, end). Adds the gradient
// contribution into `grad` (which must be pre-sized and zeroed by the caller)
// and returns the log-likelihood of the slice.
double log_likelihood_slice(const ModelSpec& spec,
                            const ParameterVector& params, const Dataset& data,
                            Eigen::Index begin, Eigen::Index end,
                            ParameterVector* grad);

}  // namespace bnn
