#pragma once

#include "bnn/model.hpp"
#include "bnn/prior.hpp"

namespace bnn {

// Tempered unnormalized log-posterior (1/T) * (log lik + log prior).
//
// The likelihood is always evaluated over fixed-size row blocks whose
// partial results are combined by a pairwise tree in block order. Worker
// count only decides which thread computes which block, so the result is
// bit-identical for any num_shards.
struct PosteriorSpec {
  ModelSpec model;
  PriorSpec prior;
  Dataset data;
  double temperature = 1.0;
  int num_shards = 1;

  void validate() const;
};

constexpr Eigen::Index kLikelihoodBlockRows = 256;

double log_density(const PosteriorSpec& post, const ParameterVector& w);

ParameterVector grad_log_density(const PosteriorSpec& post,
                                 const ParameterVector& w);

// Fused evaluation; writes the gradient into `grad` (resized as needed)
// and returns the log-density.
double value_and_grad(const PosteriorSpec& post, const ParameterVector& w,
                      ParameterVector& grad);

// Pairwise tree reduction of the block partials, in index order. Exposed for
// tests; `values` is consumed.
double tree_reduce(std::vector<double> values);

}  // namespace bnn
