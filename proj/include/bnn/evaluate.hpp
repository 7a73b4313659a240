#pragma once

#include <vector>

#include "bnn/model.hpp"
#include "bnn/sample_store.hpp"

namespace bnn {

// Classification: n x C row-stochastic class probabilities.
// Regression: n x 2 rows of (mean, std).
struct PredictiveDistribution {
  Matrix values;
  bool classification = true;

  Eigen::Index size() const { return values.rows(); }
  void validate() const;
};

// Posterior predictive as the equal-weight average over samples.
// Classification: mean of per-sample softmax rows. Regression: mixture mean
// and total-variance std sqrt(mean(sigma_i^2 + mu_i^2) - mean(mu_i)^2).
PredictiveDistribution bma_predict(const std::vector<ParameterVector>& samples,
                                   const ModelSpec& model,
                                   const Matrix& inputs);
PredictiveDistribution bma_predict(const SampleStore& store,
                                   const ModelSpec& model,
                                   const Matrix& inputs);

double accuracy(const PredictiveDistribution& pred,
                const std::vector<int>& labels);
// Mean negative log predicted probability of the true class.
double nll(const PredictiveDistribution& pred, const std::vector<int>& labels);
double rmse(const PredictiveDistribution& pred, const Vector& targets);
// Mean log of the BMA mixture density: log of the average over samples of the
// per-sample Gaussian density at the target.
double gaussian_test_ll(const std::vector<ParameterVector>& samples,
                        const ModelSpec& model, const Matrix& inputs,
                        const Vector& targets);

struct CalibrationBin {
  double confidence = 0.0;  // mean top-class probability in the bin
  double accuracy = 0.0;
  Eigen::Index count = 0;
};

// Equal-width bins on [0, 1]; empty bins excluded from the returned curve.
std::vector<CalibrationBin> calibration_curve(const PredictiveDistribution& pred,
                                              const std::vector<int>& labels,
                                              int n_bins = 20);
double ece(const PredictiveDistribution& pred, const std::vector<int>& labels,
           int n_bins = 20);

// Fraction of inputs whose top-1 class matches; argmax ties broken by lowest
// class index on both sides.
double agreement(const PredictiveDistribution& p_ref,
                 const PredictiveDistribution& p);

// Mean over inputs of (1/2) sum_j |p_ref - p|.
double total_variation(const PredictiveDistribution& p_ref,
                       const PredictiveDistribution& p);

Vector predictive_entropy(const PredictiveDistribution& pred);

// Probability that a random in-distribution confidence exceeds a random
// out-of-distribution confidence; ties count 1/2 (midrank AUC).
double ood_auc_roc(const std::vector<double>& confidences_in,
                   const std::vector<double>& confidences_out);

// Top-class probability per input.
std::vector<double> confidences(const PredictiveDistribution& pred);

// Probability assigned to `label` at `input` by each sample in turn.
std::vector<double> true_class_trace(const SampleStore& store,
                                     const ModelSpec& model,
                                     const Eigen::RowVectorXd& input,
                                     int label);

std::vector<ParameterVector> store_samples(const SampleStore& store);

}  // namespace bnn
