#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bnn/posterior.hpp"
#include "bnn/sample_store.hpp"

namespace bnn {

// Log-density evaluation with gradient: returns f(w) and fills `grad` with
// its gradient. Must be pure; may throw NonFiniteError.
using LogDensityTarget =
    std::function<double(const ParameterVector&, ParameterVector&)>;

LogDensityTarget make_target(const PosteriorSpec& post);

struct HmcConfig {
  double trajectory_length = 1.0;
  double step_size = 0.1;
  long n_burnin = 0;
  long n_samples = 1;
  int n_chains = 1;
  std::uint64_t seed = 0;
  int workers = 1;  // chain-level parallelism cap

  long n_leapfrog() const;
  void validate() const;
};

struct ChainState {
  ParameterVector w;
  long iteration = 0;
  std::vector<double> accept_probs;
  std::vector<bool> accepted;
};

// pi * alpha / 2: a quarter-turn on a spherical Gaussian with std alpha
double suggest_trajectory_length(double prior_std);

struct LeapfrogResult {
  ParameterVector w;
  ParameterVector m;
  double log_density = 0.0;
};

LeapfrogResult leapfrog(ParameterVector w, ParameterVector m, double step_size,
                        long n_steps, const LogDensityTarget& target);

double accept_probability(double f_old, double f_new,
                          const ParameterVector& m_old,
                          const ParameterVector& m_new);

class Rng;

// One MH-corrected iteration; updates the state in place and returns the
// stored sample (the new state on accept, the unchanged one on reject).
ParameterVector hmc_step(ChainState& state, const HmcConfig& config,
                         const LogDensityTarget& target, Rng& rng);

SampleStore run_chain(const HmcConfig& config, const LogDensityTarget& target,
                      const ParameterVector& init, int chain_index = 0);

// Independent chains differing only in RNG stream and initialization,
// executed concurrently up to `config.workers`.
std::vector<SampleStore> run_chains(
    const HmcConfig& config, const LogDensityTarget& target,
    const std::function<ParameterVector(int)>& init_for_chain);

std::vector<SampleStore> run_chains(const HmcConfig& config,
                                    const PosteriorSpec& post);

}  // namespace bnn
