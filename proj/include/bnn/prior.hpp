#pragma once

#include <cstdint>

#include "bnn/model.hpp"

namespace bnn {

enum class PriorFamily { Gaussian, MixtureOfGaussians, Logistic };

// i.i.d. per-coordinate prior over the flattened parameters. Log-densities
// include all normalizing constants so tempered targets stay comparable
// under the MH correction.
struct PriorSpec {
  PriorFamily family = PriorFamily::Gaussian;
  double variance = 1.0;        // gaussian
  double mog_variance1 = 1.0;   // mixture components, centered at 0
  double mog_variance2 = 1.0;
  double mog_weight1 = 0.5;     // weight of component 1; component 2 gets 1 - w1
  double logistic_variance = 1.0;

  // standard deviation used for the trajectory-length heuristic; for the
  // non-Gaussian families this is the marginal std of the family
  double marginal_std() const;
  // per-coordinate logistic scale solving s^2 pi^2 / 3 = variance
  double logistic_scale() const;
  void validate() const;
};

double log_prior(const PriorSpec& prior, const ParameterVector& w);

ParameterVector grad_log_prior(const PriorSpec& prior,
                               const ParameterVector& w);

ParameterVector sample_prior(const PriorSpec& prior, Eigen::Index dim,
                             std::uint64_t seed);

}  // namespace bnn
