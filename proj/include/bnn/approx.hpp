#pragma once

#include <cstdint>
#include <vector>

#include "bnn/posterior.hpp"
#include "bnn/sample_store.hpp"

namespace bnn {

enum class LrSchedule { Constant, Cosine, Cyclical };
enum class Preconditioner { None, Rms };

struct TrainConfig {
  LrSchedule schedule = LrSchedule::Constant;
  int n_cycles = 1;            // cyclical schedule only
  double base_lr = 1e-3;
  Eigen::Index batch_size = 0; // 0 = full batch
  long n_epochs = 100;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  Preconditioner preconditioner = Preconditioner::None;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;
  // SGMCMC sampling control
  long n_burnin_epochs = 0;
  long thin_epochs = 10;  // epochs between stored samples

  void validate(Eigen::Index n_data) const;
};

double cosine_lr(long t, long t_total, double base);
double cyclical_lr(long t, long t_total, int n_cycles, double base);

// Minibatch SGD with momentum on the negative log-joint, scaled by 1/n so
// step sizes stay in the usual range. Weight decay enters through the prior.
ParameterVector train_sgd(const TrainConfig& config, const PosteriorSpec& post,
                          const ParameterVector& init);
ParameterVector train_sgd(const TrainConfig& config, const PosteriorSpec& post);

std::vector<ParameterVector> deep_ensemble(int n_models,
                                           const TrainConfig& config,
                                           const PosteriorSpec& post,
                                           int workers = 1);

// w <- w + (eps/2) grad_hat + N(0, eps I), with the likelihood part of
// grad_hat rescaled by n / batch_size.
SampleStore sgld_run(const TrainConfig& config, const PosteriorSpec& post);

// momentum-augmented variant: v <- mu v + (eps/2) grad_hat + N(0, (1-mu) eps),
// w <- w + v; reduces to SGLD at momentum 0. Optional cyclical step size and
// RMS preconditioning of both gradient and noise.
SampleStore sghmc_run(const TrainConfig& config, const PosteriorSpec& post);

struct VariationalPosterior {
  ParameterVector mean;
  ParameterVector rho;  // std = softplus(rho)

  Vector stddev() const;
  std::vector<double> elbo_trace;
};

// Diagonal-Gaussian ELBO maximization with one reparameterized draw per step,
// analytic KL against a Gaussian prior, Adam on (mean, rho).
VariationalPosterior mfvi_fit(const TrainConfig& config,
                              const PosteriorSpec& post,
                              const ParameterVector& init_mean,
                              double init_std = 1e-2);

std::vector<ParameterVector> mfvi_sample(const VariationalPosterior& vp,
                                         int n, std::uint64_t seed);

}  // namespace bnn
