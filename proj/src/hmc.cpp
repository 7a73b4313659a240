#include "bnn/hmc.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

double suggest_trajectory_length(double prior_std) {
  if (prior_std <= 0) throw std::invalid_argument("prior std must be > 0");
  return std::numbers::pi * prior_std / 2.0;
}

long HmcConfig::n_leapfrog() const {
  return std::max(1L, std::lround(trajectory_length / step_size));
}

void HmcConfig::validate() const {
  if (trajectory_length <= 0)
    throw std::invalid_argument("trajectory_length must be > 0");
  if (step_size <= 0) throw std::invalid_argument("step_size must be > 0");
  if (n_burnin < 0) throw std::invalid_argument("n_burnin must be >= 0");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
}

LogDensityTarget make_target(const PosteriorSpec& post) {
  post.validate();
  return [post](const ParameterVector& w, ParameterVector& grad) {
    return value_and_grad(post, w, grad);
  };
}

LeapfrogResult leapfrog(ParameterVector w, ParameterVector m, double step_size,
                        long n_steps, const LogDensityTarget& target) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (step_size <= 0) throw std::invalid_argument("step_size must be > 0");
  // half-kick / drift / half-kick, with adjacent half-kicks fused
  ParameterVector grad(w.size());
  double f = target(w, grad);
  m += (0.5 * step_size) * grad;
  for (long i = 1; i <= n_steps; ++i) {
    w += step_size * m;
    f = target(w, grad);
    m += ((i < n_steps ? 1.0 : 0.5) * step_size) * grad;
    if (!w.allFinite() || !m.allFinite())
      throw NonFiniteError("leapfrog state diverged at step " +
                           std::to_string(i));
  }
  return {std::move(w), std::move(m), f};
}

double accept_probability(double f_old, double f_new,
                          const ParameterVector& m_old,
                          const ParameterVector& m_new) {
  if (!std::isfinite(f_old) || !std::isfinite(f_new))
    throw std::invalid_argument("accept_probability requires finite energies");
  const double log_ratio =
      f_new - f_old + 0.5 * (m_old.squaredNorm() - m_new.squaredNorm());
  return std::min(1.0, std::exp(log_ratio));
}

ParameterVector hmc_step(ChainState& state, const HmcConfig& config,
                         const LogDensityTarget& target, Rng& rng) {
  ParameterVector m(state.w.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = rng.normal();

  ParameterVector grad(state.w.size());
  const double f_old = target(state.w, grad);

  double p_accept = 0.0;
  bool ok = true;
  LeapfrogResult prop;
  try {
    prop = leapfrog(state.w, m, config.step_size, config.n_leapfrog(), target);
    p_accept = accept_probability(f_old, prop.log_density, m, prop.m);
  } catch (const NonFiniteError& e) {
    std::fprintf(stderr,
                 "[hmc] iteration %ld: proposal rejected (%s)\n",
                 state.iteration, e.what());
    ok = false;
  }

  const double u = rng.uniform();
  const bool accept = ok && u <= p_accept;
  if (accept) state.w = std::move(prop.w);
  state.accept_probs.push_back(p_accept);
  state.accepted.push_back(accept);
  ++state.iteration;
  return state.w;  // stored unconditionally, duplicated on rejection
}

SampleStore run_chain(const HmcConfig& config, const LogDensityTarget& target,
                      const ParameterVector& init, int chain_index) {
  config.validate();
  if (!init.allFinite())
    throw std::invalid_argument("initial parameters must be finite");
  Rng rng(config.seed, static_cast<std::uint64_t>(chain_index));

  ChainState state;
  state.w = init;

  // burn-in: leapfrog with fresh momentum, no MH correction
  for (long i = 0; i < config.n_burnin; ++i) {
    ParameterVector m(state.w.size());
    for (Eigen::Index k = 0; k < m.size(); ++k) m[k] = rng.normal();
    try {
      LeapfrogResult r =
          leapfrog(state.w, m, config.step_size, config.n_leapfrog(), target);
      state.w = std::move(r.w);
    } catch (const NonFiniteError& e) {
      throw std::runtime_error("chain " + std::to_string(chain_index) +
                               " diverged during burn-in iteration " +
                               std::to_string(i) + ": " + e.what());
    }
  }

  SampleStore store;
  store.chain_id = "chain-" + std::to_string(chain_index);
  store.samples.resize(config.n_samples, init.size());
  for (long k = 0; k < config.n_samples; ++k) {
    try {
      store.samples.row(k) = hmc_step(state, config, target, rng).transpose();
    } catch (const std::exception& e) {
      throw std::runtime_error("chain " + std::to_string(chain_index) +
                               " failed at sampling iteration " +
                               std::to_string(k) + ": " + e.what());
    }
  }
  store.accept_probs = state.accept_probs;
  store.accepted = state.accepted;
  store.config = {
      {"sampler", "hmc"},
      {"trajectory_length", config.trajectory_length},
      {"step_size", config.step_size},
      {"n_leapfrog", config.n_leapfrog()},
      {"n_burnin", config.n_burnin},
      {"n_samples", config.n_samples},
      {"n_chains", config.n_chains},
      {"seed", config.seed},
      {"chain_index", chain_index},
  };
  return store;
}

std::vector<SampleStore> run_chains(
    const HmcConfig& config, const LogDensityTarget& target,
    const std::function<ParameterVector(int)>& init_for_chain) {
  config.validate();
  std::vector<SampleStore> stores(static_cast<std::size_t>(config.n_chains));
  std::vector<std::exception_ptr> errors(
      static_cast<std::size_t>(config.n_chains));

  auto run_one = [&](int c) {
    try {
      stores[static_cast<std::size_t>(c)] =
          run_chain(config, target, init_for_chain(c), c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };

  const int workers =
      std::max(1, std::min(config.workers, config.n_chains));
  if (workers == 1) {
    for (int c = 0; c < config.n_chains; ++c) run_one(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (int c = t; c < config.n_chains; c += workers) run_one(c);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return stores;
}

std::vector<SampleStore> run_chains(const HmcConfig& config,
                                    const PosteriorSpec& post) {
  LogDensityTarget target = make_target(post);
  const Eigen::Index dim = param_count(post.model);
  auto init = [&](int c) {
    return sample_prior(post.prior, dim,
                        mix64(config.seed) ^ mix64(0x1000 + c));
  };
  return run_chains(config, target, init);
}

}  // namespace bnn
