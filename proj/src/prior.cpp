#include "bnn/prior.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bnn/rng.hpp"

namespace bnn {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

double gaussian_logpdf(double x, double var) {
  return -0.5 * (kLogTwoPi + std::log(var) + x * x / var);
}

}  // namespace

void PriorSpec::validate() const {
  switch (family) {
    case PriorFamily::Gaussian:
      if (variance <= 0) throw std::invalid_argument("prior variance must be > 0");
      break;
    case PriorFamily::MixtureOfGaussians:
      if (mog_variance1 <= 0 || mog_variance2 <= 0)
        throw std::invalid_argument("mixture variances must be > 0");
      if (mog_weight1 <= 0 || mog_weight1 >= 1)
        throw std::invalid_argument("mixture weight must be in (0, 1)");
      break;
    case PriorFamily::Logistic:
      if (logistic_variance <= 0)
        throw std::invalid_argument("logistic variance must be > 0");
      break;
  }
}

double PriorSpec::logistic_scale() const {
  return std::sqrt(3.0 * logistic_variance) / std::numbers::pi;
}

double PriorSpec::marginal_std() const {
  switch (family) {
    case PriorFamily::Gaussian:
      return std::sqrt(variance);
    case PriorFamily::MixtureOfGaussians:
      return std::sqrt(mog_weight1 * mog_variance1 +
                       (1.0 - mog_weight1) * mog_variance2);
    case PriorFamily::Logistic:
      return std::sqrt(logistic_variance);
  }
  return 0.0;
}

double log_prior(const PriorSpec& prior, const ParameterVector& w) {
  prior.validate();
  const Eigen::Index d = w.size();
  switch (prior.family) {
    case PriorFamily::Gaussian:
      return -0.5 * (d * (kLogTwoPi + std::log(prior.variance)) +
                     w.squaredNorm() / prior.variance);
    case PriorFamily::MixtureOfGaussians: {
      const double lw1 = std::log(prior.mog_weight1);
      const double lw2 = std::log(1.0 - prior.mog_weight1);
      double total = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double a = lw1 + gaussian_logpdf(w[i], prior.mog_variance1);
        const double b = lw2 + gaussian_logpdf(w[i], prior.mog_variance2);
        const double m = std::max(a, b);
        total += m + std::log(std::exp(a - m) + std::exp(b - m));
      }
      return total;
    }
    case PriorFamily::Logistic: {
      const double s = prior.logistic_scale();
      double total = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double z = std::abs(w[i]) / s;  // use |x|: pdf is symmetric
        total += -z - std::log(s) - 2.0 * std::log1p(std::exp(-z));
      }
      return total;
    }
  }
  return 0.0;
}

ParameterVector grad_log_prior(const PriorSpec& prior,
                               const ParameterVector& w) {
  prior.validate();
  switch (prior.family) {
    case PriorFamily::Gaussian:
      return -w / prior.variance;
    case PriorFamily::MixtureOfGaussians: {
      ParameterVector g(w.size());
      const double lw1 = std::log(prior.mog_weight1);
      const double lw2 = std::log(1.0 - prior.mog_weight1);
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double a = lw1 + gaussian_logpdf(w[i], prior.mog_variance1);
        const double b = lw2 + gaussian_logpdf(w[i], prior.mog_variance2);
        const double m = std::max(a, b);
        const double ea = std::exp(a - m), eb = std::exp(b - m);
        const double r1 = ea / (ea + eb);  // responsibility of component 1
        g[i] = -w[i] * (r1 / prior.mog_variance1 +
                        (1.0 - r1) / prior.mog_variance2);
      }
      return g;
    }
    case PriorFamily::Logistic: {
      const double s = prior.logistic_scale();
      return w.unaryExpr(
          [s](double x) { return -std::tanh(x / (2.0 * s)) / s; });
    }
  }
  return {};
}

ParameterVector sample_prior(const PriorSpec& prior, Eigen::Index dim,
                             std::uint64_t seed) {
  prior.validate();
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  Rng rng(seed);
  ParameterVector w(dim);
  switch (prior.family) {
    case PriorFamily::Gaussian: {
      const double sd = std::sqrt(prior.variance);
      for (Eigen::Index i = 0; i < dim; ++i) w[i] = sd * rng.normal();
      break;
    }
    case PriorFamily::MixtureOfGaussians: {
      const double sd1 = std::sqrt(prior.mog_variance1);
      const double sd2 = std::sqrt(prior.mog_variance2);
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double sd = rng.uniform() < prior.mog_weight1 ? sd1 : sd2;
        w[i] = sd * rng.normal();
      }
      break;
    }
    case PriorFamily::Logistic: {
      const double s = prior.logistic_scale();
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double u = rng.uniform();
        w[i] = s * std::log(u / (1.0 - u));
      }
      break;
    }
  }
  return w;
}

}  // namespace bnn
