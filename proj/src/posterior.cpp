#include "bnn/posterior.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "bnn/errors.hpp"

namespace bnn {
namespace {

// generic pairwise reduction in index order; T is double or ParameterVector
template <typename T>
T tree_reduce_impl(std::vector<T> vals) {
  if (vals.empty()) throw std::invalid_argument("nothing to reduce");
  std::size_t len = vals.size();
  while (len > 1) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i)
      vals[i] = vals[2 * i] + vals[2 * i + 1];
    if (len % 2 == 1) {
      vals[half] = vals[len - 1];
      len = half + 1;
    } else {
      len = half;
    }
  }
  return vals[0];
}

struct BlockResults {
  std::vector<double> values;
  std::vector<ParameterVector> grads;  // empty when no gradient requested
};

BlockResults evaluate_blocks(const PosteriorSpec& post,
                             const ParameterVector& w, bool with_grad) {
  const Eigen::Index n = post.data.size();
  const Eigen::Index nb =
      (n + kLikelihoodBlockRows - 1) / kLikelihoodBlockRows;
  BlockResults res;
  res.values.assign(static_cast<std::size_t>(nb), 0.0);
  if (with_grad)
    res.grads.assign(static_cast<std::size_t>(nb),
                     ParameterVector::Zero(w.size()));

  auto run_block = [&](Eigen::Index b) {
    const Eigen::Index begin = b * kLikelihoodBlockRows;
    const Eigen::Index end = std::min(n, begin + kLikelihoodBlockRows);
    res.values[static_cast<std::size_t>(b)] = log_likelihood_slice(
        post.model, w, post.data, begin, end,
        with_grad ? &res.grads[static_cast<std::size_t>(b)] : nullptr);
  };

  const int workers = std::min<int>(post.num_shards, static_cast<int>(nb));
  if (workers <= 1) {
    for (Eigen::Index b = 0; b < nb; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (Eigen::Index b = t; b < nb; b += workers) run_block(b);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return res;
}

}  // namespace

void PosteriorSpec::validate() const {
  model.validate();
  prior.validate();
  data.validate();
  if (temperature <= 0) throw std::invalid_argument("temperature must be > 0");
  if (num_shards < 1) throw std::invalid_argument("num_shards must be >= 1");
}

double tree_reduce(std::vector<double> values) {
  return tree_reduce_impl(std::move(values));
}

namespace {
// hot path; full PosteriorSpec::validate() is for construction time
void check_scalars(const PosteriorSpec& post) {
  if (post.temperature <= 0)
    throw std::invalid_argument("temperature must be > 0");
  if (post.num_shards < 1)
    throw std::invalid_argument("num_shards must be >= 1");
}
}  // namespace

double log_density(const PosteriorSpec& post, const ParameterVector& w) {
  check_scalars(post);
  BlockResults blocks = evaluate_blocks(post, w, false);
  const double ll = tree_reduce_impl(std::move(blocks.values));
  const double lp = log_prior(post.prior, w);
  const double f = (ll + lp) / post.temperature;
  if (!std::isfinite(f)) throw NonFiniteError("log-density is non-finite");
  return f;
}

double value_and_grad(const PosteriorSpec& post, const ParameterVector& w,
                      ParameterVector& grad) {
  check_scalars(post);
  BlockResults blocks = evaluate_blocks(post, w, true);
  const double ll = tree_reduce_impl(std::move(blocks.values));
  grad = tree_reduce_impl(std::move(blocks.grads));
  grad += grad_log_prior(post.prior, w);
  grad /= post.temperature;
  const double lp = log_prior(post.prior, w);
  const double f = (ll + lp) / post.temperature;
  if (!std::isfinite(f) || !grad.allFinite())
    throw NonFiniteError("log-density or gradient is non-finite");
  return f;
}

ParameterVector grad_log_density(const PosteriorSpec& post,
                                 const ParameterVector& w) {
  ParameterVector grad;
  value_and_grad(post, w, grad);
  return grad;
}

}  // namespace bnn
