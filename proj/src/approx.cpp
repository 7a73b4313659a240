#include "bnn/approx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {
namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

double schedule_lr(const TrainConfig& cfg, long t, long t_total) {
  switch (cfg.schedule) {
    case LrSchedule::Constant:
      return cfg.base_lr;
    case LrSchedule::Cosine:
      return cosine_lr(t, t_total, cfg.base_lr);
    case LrSchedule::Cyclical:
      return cyclical_lr(t, t_total, cfg.n_cycles, cfg.base_lr);
  }
  return cfg.base_lr;
}

Dataset permute_rows(const Dataset& data, const std::vector<Eigen::Index>& order) {
  Dataset out;
  out.name = data.name;
  out.inputs.resize(data.inputs.rows(), data.inputs.cols());
  if (data.is_classification())
    out.labels.resize(data.labels.size());
  else
    out.targets.resize(data.targets.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out.inputs.row(i) = data.inputs.row(order[static_cast<std::size_t>(i)]);
    if (data.is_classification())
      out.labels[static_cast<std::size_t>(i)] =
          data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    else
      out.targets[i] = data.targets[order[static_cast<std::size_t>(i)]];
  }
  return out;
}

// (n / b) * grad_ll(batch) + grad_prior, and the matching stochastic estimate
// of the log-joint, both divided by the temperature
double batch_value_grad(const PosteriorSpec& post, const Dataset& shuffled,
                        Eigen::Index begin, Eigen::Index end,
                        const ParameterVector& w, ParameterVector& grad) {
  const double scale =
      static_cast<double>(post.data.size()) / static_cast<double>(end - begin);
  grad.setZero();
  const double ll =
      log_likelihood_slice(post.model, w, shuffled, begin, end, &grad);
  grad *= scale;
  grad += grad_log_prior(post.prior, w);
  grad /= post.temperature;
  return (scale * ll + log_prior(post.prior, w)) / post.temperature;
}

struct BatchPlan {
  Eigen::Index batch = 0;
  long per_epoch = 0;
};

BatchPlan plan_batches(const TrainConfig& cfg, Eigen::Index n) {
  BatchPlan plan;
  plan.batch = cfg.batch_size == 0 ? n : cfg.batch_size;
  plan.per_epoch = static_cast<long>((n + plan.batch - 1) / plan.batch);
  return plan;
}

}  // namespace

void TrainConfig::validate(Eigen::Index n_data) const {
  if (base_lr <= 0) throw std::invalid_argument("base_lr must be > 0");
  if (batch_size < 0 || batch_size > n_data)
    throw std::invalid_argument("batch_size must be in [0, n]");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (n_epochs < 1) throw std::invalid_argument("n_epochs must be >= 1");
  if (schedule == LrSchedule::Cyclical && n_cycles < 1)
    throw std::invalid_argument("n_cycles must be >= 1");
  if (thin_epochs < 1) throw std::invalid_argument("thin_epochs must be >= 1");
  if (n_burnin_epochs < 0 || n_burnin_epochs >= n_epochs + 1)
    throw std::invalid_argument("n_burnin_epochs out of range");
}

double cosine_lr(long t, long t_total, double base) {
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t / t_total));
}

double cyclical_lr(long t, long t_total, int n_cycles, double base) {
  const double cycle_len = static_cast<double>(t_total) / n_cycles;
  const double frac =
      std::fmod(static_cast<double>(t), cycle_len) / cycle_len;  // [0, 1)
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

ParameterVector train_sgd(const TrainConfig& cfg, const PosteriorSpec& post,
                          const ParameterVector& init) {
  post.validate();
  const Eigen::Index n = post.data.size();
  cfg.validate(n);
  const BatchPlan plan = plan_batches(cfg, n);
  const long t_total = cfg.n_epochs * plan.per_epoch;

  Rng rng(cfg.seed, 0xdead);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  ParameterVector w = init;
  ParameterVector velocity = ParameterVector::Zero(w.size());
  ParameterVector grad(w.size());
  long t = 0;
  for (long epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    const Dataset shuffled = permute_rows(post.data, order);
    for (Eigen::Index begin = 0; begin < n; begin += plan.batch, ++t) {
      const Eigen::Index end = std::min(n, begin + plan.batch);
      double value;
      try {
        value = batch_value_grad(post, shuffled, begin, end, w, grad);
      } catch (const NonFiniteError& e) {
        throw std::runtime_error("sgd diverged at epoch " +
                                 std::to_string(epoch) + ": " + e.what());
      }
      (void)value;
      const double lr = schedule_lr(cfg, t, t_total);
      // minimize the mean negative log-joint
      velocity = cfg.momentum * velocity + (lr / n) * grad;
      w += velocity;
      if (!w.allFinite())
        throw std::runtime_error("sgd diverged at epoch " +
                                 std::to_string(epoch));
    }
  }
  return w;
}

ParameterVector train_sgd(const TrainConfig& cfg, const PosteriorSpec& post) {
  return train_sgd(cfg, post,
                   init_params(post.model, 0.1, mix64(cfg.seed) ^ 0x51));
}

std::vector<ParameterVector> deep_ensemble(int n_models,
                                           const TrainConfig& cfg,
                                           const PosteriorSpec& post,
                                           int workers) {
  if (n_models < 1) throw std::invalid_argument("n_models must be >= 1");
  std::vector<ParameterVector> members(static_cast<std::size_t>(n_models));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_models));
  auto run_one = [&](int i) {
    try {
      TrainConfig child = cfg;
      child.seed = mix64(cfg.seed) ^ mix64(static_cast<std::uint64_t>(i));
      members[static_cast<std::size_t>(i)] = train_sgd(
          child, post,
          init_params(post.model, 0.1, mix64(child.seed) ^ 0x51));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  workers = std::max(1, std::min(workers, n_models));
  if (workers == 1) {
    for (int i = 0; i < n_models; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int tIdx = 0; tIdx < workers; ++tIdx)
      pool.emplace_back([&, tIdx] {
        for (int i = tIdx; i < n_models; i += workers) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return members;
}

SampleStore sghmc_run(const TrainConfig& cfg, const PosteriorSpec& post) {
  post.validate();
  const Eigen::Index n = post.data.size();
  cfg.validate(n);
  const BatchPlan plan = plan_batches(cfg, n);
  const long t_total = cfg.n_epochs * plan.per_epoch;

  Rng rng(cfg.seed, 0x5a5a);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const Eigen::Index dim = param_count(post.model);
  ParameterVector w = init_params(post.model, 0.1, mix64(cfg.seed) ^ 0x52);
  ParameterVector velocity = ParameterVector::Zero(dim);
  ParameterVector grad(dim);
  ParameterVector rms = ParameterVector::Zero(dim);

  std::vector<ParameterVector> samples;
  long t = 0;
  for (long epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    const Dataset shuffled = permute_rows(post.data, order);
    for (Eigen::Index begin = 0; begin < n; begin += plan.batch, ++t) {
      const Eigen::Index end = std::min(n, begin + plan.batch);
      try {
        batch_value_grad(post, shuffled, begin, end, w, grad);
      } catch (const NonFiniteError& e) {
        throw std::runtime_error("sgmcmc diverged at epoch " +
                                 std::to_string(epoch) + ": " + e.what());
      }
      const double eps = schedule_lr(cfg, t, t_total);
      if (cfg.preconditioner == Preconditioner::Rms) {
        rms = cfg.rms_decay * rms +
              (1.0 - cfg.rms_decay) * grad.array().square().matrix();
        const Eigen::ArrayXd p =
            1.0 / (rms.array().sqrt() + cfg.rms_epsilon);
        ParameterVector noise(dim);
        for (Eigen::Index i = 0; i < dim; ++i) noise[i] = rng.normal();
        velocity = cfg.momentum * velocity +
                   (0.5 * eps) * (grad.array() * p).matrix() +
                   (((1.0 - cfg.momentum) * eps * p).sqrt() * noise.array())
                       .matrix();
      } else {
        ParameterVector noise(dim);
        for (Eigen::Index i = 0; i < dim; ++i) noise[i] = rng.normal();
        velocity = cfg.momentum * velocity + (0.5 * eps) * grad +
                   std::sqrt((1.0 - cfg.momentum) * eps) * noise;
      }
      w += velocity;
      if (!w.allFinite())
        throw std::runtime_error("sgmcmc diverged at epoch " +
                                 std::to_string(epoch));
    }
    const long done = epoch + 1;
    if (done > cfg.n_burnin_epochs &&
        (done - cfg.n_burnin_epochs) % cfg.thin_epochs == 0)
      samples.push_back(w);
  }

  SampleStore store;
  store.chain_id = cfg.momentum == 0.0 ? "sgld" : "sghmc";
  store.samples.resize(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i)
    store.samples.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  store.config = {
      {"sampler", store.chain_id},
      {"base_lr", cfg.base_lr},
      {"momentum", cfg.momentum},
      {"preconditioner",
       cfg.preconditioner == Preconditioner::Rms ? "rms" : "none"},
      {"batch_size", plan.batch},
      {"n_epochs", cfg.n_epochs},
      {"n_burnin_epochs", cfg.n_burnin_epochs},
      {"thin_epochs", cfg.thin_epochs},
      {"seed", cfg.seed},
      // update form: v <- mu v + (eps/2) g + N(0, (1 - mu) eps P)
      {"update", "sghmc-friction-1-minus-momentum"},
  };
  return store;
}

SampleStore sgld_run(const TrainConfig& cfg, const PosteriorSpec& post) {
  TrainConfig plain = cfg;
  plain.momentum = 0.0;
  plain.preconditioner = Preconditioner::None;
  return sghmc_run(plain, post);
}

Vector VariationalPosterior::stddev() const {
  return rho.unaryExpr([](double r) { return softplus(r); });
}

VariationalPosterior mfvi_fit(const TrainConfig& cfg,
                              const PosteriorSpec& post,
                              const ParameterVector& init_mean,
                              double init_std) {
  post.validate();
  if (post.prior.family != PriorFamily::Gaussian)
    throw std::invalid_argument(
        "mfvi requires a Gaussian prior for the analytic KL");
  if (init_std <= 0) throw std::invalid_argument("init_std must be > 0");
  const Eigen::Index n = post.data.size();
  cfg.validate(n);
  const Eigen::Index dim = param_count(post.model);
  if (init_mean.size() != dim)
    throw std::invalid_argument("init_mean has wrong length");
  const BatchPlan plan = plan_batches(cfg, n);
  const long t_total = cfg.n_epochs * plan.per_epoch;
  const double prior_var = post.prior.variance;

  VariationalPosterior vp;
  vp.mean = init_mean;
  vp.rho = ParameterVector::Constant(dim, std::log(std::expm1(init_std)));

  Rng rng(cfg.seed, 0xe1b0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  // Adam state over the stacked (mean, rho) parameters
  ParameterVector m1 = ParameterVector::Zero(2 * dim);
  ParameterVector m2 = ParameterVector::Zero(2 * dim);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  ParameterVector grad_ll(dim), xi(dim), w(dim);
  long t = 0;
  for (long epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    const Dataset shuffled = permute_rows(post.data, order);
    double epoch_elbo = 0.0;
    for (Eigen::Index begin = 0; begin < n; begin += plan.batch, ++t) {
      const Eigen::Index end = std::min(n, begin + plan.batch);
      const double scale = static_cast<double>(n) / (end - begin);
      const Vector sigma = vp.stddev();
      for (Eigen::Index i = 0; i < dim; ++i) xi[i] = rng.normal();
      w = vp.mean + sigma.cwiseProduct(xi);
      grad_ll.setZero();
      double ll;
      try {
        ll = scale *
             log_likelihood_slice(post.model, w, shuffled, begin, end, &grad_ll);
        grad_ll *= scale;
      } catch (const NonFiniteError& e) {
        throw std::runtime_error("mfvi diverged at epoch " +
                                 std::to_string(epoch) + ": " + e.what());
      }
      // KL(q || N(0, prior_var)) and its gradients
      double kl = 0.0;
      ParameterVector g(2 * dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double mu = vp.mean[i], s = sigma[i];
        kl += std::log(std::sqrt(prior_var) / s) +
              (s * s + mu * mu) / (2.0 * prior_var) - 0.5;
        const double dmu = grad_ll[i] - mu / prior_var;
        const double dsigma = grad_ll[i] * xi[i] - (s / prior_var - 1.0 / s);
        g[i] = dmu;
        g[dim + i] = dsigma * sigmoid(vp.rho[i]);
      }
      epoch_elbo += (ll - kl) / plan.per_epoch;

      // Adam ascent on the ELBO
      const double lr = schedule_lr(cfg, t, t_total);
      m1 = beta1 * m1 + (1.0 - beta1) * g;
      m2 = beta2 * m2 + (1.0 - beta2) * g.array().square().matrix();
      const double c1 = 1.0 - std::pow(beta1, t + 1);
      const double c2 = 1.0 - std::pow(beta2, t + 1);
      const Eigen::ArrayXd step =
          lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);
      vp.mean += step.head(dim).matrix();
      vp.rho += step.tail(dim).matrix();
      if (!vp.mean.allFinite() || !vp.rho.allFinite())
        throw std::runtime_error("mfvi diverged at epoch " +
                                 std::to_string(epoch));
    }
    vp.elbo_trace.push_back(epoch_elbo);
  }
  return vp;
}

std::vector<ParameterVector> mfvi_sample(const VariationalPosterior& vp,
                                         int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  Rng rng(seed, 0x5a11);
  const Vector sigma = vp.stddev();
  std::vector<ParameterVector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    ParameterVector w(vp.mean.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w[i] = vp.mean[i] + sigma[i] * rng.normal();
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace bnn
