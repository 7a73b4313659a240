#include "bnn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

std::vector<int> layer_sizes(const ModelSpec& spec) {
  std::vector<int> sizes;
  sizes.push_back(spec.input_dim);
  for (int w : spec.hidden_widths) sizes.push_back(w);
  sizes.push_back(spec.output_dim());
  return sizes;
}

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::Identity:
      break;
    case Activation::Relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Swish:
      z = z.unaryExpr([](double x) { return x * sigmoid(x); });
      break;
  }
}

// derivative in terms of the pre-activation
Matrix activation_grad(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::Identity:
      return Matrix::Ones(z.rows(), z.cols());
    case Activation::Relu:
      return z.unaryExpr([](double x) { return x > 0 ? 1.0 : 0.0; });
    case Activation::Swish:
      return z.unaryExpr([](double x) {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
  }
  return {};
}

}  // namespace

int ModelSpec::output_dim() const {
  switch (head) {
    case HeadKind::RegressionMeanStd:
      return 2;
    case HeadKind::RegressionFixedStd:
      return 1;
    case HeadKind::Classification:
      return num_classes;
  }
  return 0;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  for (int w : hidden_widths)
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  if (head == HeadKind::Classification && num_classes < 2)
    throw std::invalid_argument("num_classes must be >= 2");
  if (head == HeadKind::RegressionFixedStd && fixed_noise_std <= 0)
    throw std::invalid_argument("fixed_noise_std must be > 0");
}

void Dataset::validate() const {
  if (inputs.rows() < 1) throw std::invalid_argument("dataset is empty");
  if (!inputs.allFinite()) throw std::invalid_argument("dataset inputs contain NaN/inf");
  if (is_classification()) {
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
      throw std::invalid_argument("label count does not match input rows");
  } else {
    if (targets.size() != inputs.rows())
      throw std::invalid_argument("target count does not match input rows");
    if (!targets.allFinite()) throw std::invalid_argument("targets contain NaN/inf");
  }
}

std::int64_t param_count(const ModelSpec& spec) {
  spec.validate();
  const auto sizes = layer_sizes(spec);
  std::int64_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    total += static_cast<std::int64_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  return total;
}

ParameterVector init_params(const ModelSpec& spec, double scale,
                            std::uint64_t seed) {
  if (scale <= 0) throw std::invalid_argument("init scale must be > 0");
  Rng rng(seed);
  ParameterVector w(param_count(spec));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = scale * rng.normal();
  return w;
}

Matrix forward(const ModelSpec& spec, const ParameterVector& params,
               const Matrix& inputs) {
  spec.validate();
  if (params.size() != param_count(spec))
    throw std::invalid_argument("parameter vector length does not match spec");
  if (inputs.cols() != spec.input_dim)
    throw std::invalid_argument("input width does not match spec");

  const auto sizes = layer_sizes(spec);
  Matrix h = inputs;
  const double* p = params.data();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    RowMajorMap w(p, out, in);
    p += static_cast<std::ptrdiff_t>(in) * out;
    Eigen::Map<const Vector> b(p, out);
    p += out;
    Matrix z = (h * w.transpose()).rowwise() + b.transpose();
    if (l + 2 < sizes.size()) apply_activation(spec.activation, z);
    h = std::move(z);
  }
  return h;
}

Matrix forward_mean_std(const ModelSpec& spec, const ParameterVector& params,
                        const Matrix& inputs) {
  const Matrix out = forward(spec, params, inputs);
  Matrix ms(out.rows(), 2);
  if (spec.head == HeadKind::RegressionMeanStd) {
    ms.col(0) = out.col(0);
    ms.col(1) =
        out.col(1).unaryExpr([](double r) { return softplus(r) + kSigmaFloor; });
  } else if (spec.head == HeadKind::RegressionFixedStd) {
    ms.col(0) = out.col(0);
    ms.col(1).setConstant(spec.fixed_noise_std);
  } else {
    throw std::invalid_argument("forward_mean_std requires a regression head");
  }
  return ms;
}

double log_likelihood_slice(const ModelSpec& spec,
                            const ParameterVector& params, const Dataset& data,
                            Eigen::Index begin, Eigen::Index end,
                            ParameterVector* grad) {
  spec.validate();
  if (params.size() != param_count(spec))
    throw std::invalid_argument("parameter vector length does not match spec");
  if (begin < 0 || end > data.size() || begin >= end)
    throw std::invalid_argument("bad slice bounds");
  if (spec.is_classification() != data.is_classification())
    throw std::invalid_argument("dataset/head kind mismatch");

  const auto sizes = layer_sizes(spec);
  const std::size_t n_layers = sizes.size() - 1;
  const Eigen::Index n = end - begin;

  // forward, caching pre-activations when a backward pass is needed
  std::vector<Matrix> pre;         // z per layer
  std::vector<Matrix> activated;   // a per layer; activated[0] is the input
  activated.reserve(n_layers + 1);
  activated.push_back(data.inputs.middleRows(begin, n));
  const double* p = params.data();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    RowMajorMap w(p, out, in);
    p += static_cast<std::ptrdiff_t>(in) * out;
    Eigen::Map<const Vector> b(p, out);
    p += out;
    Matrix z = (activated.back() * w.transpose()).rowwise() + b.transpose();
    if (l + 1 < n_layers) {
      if (grad) pre.push_back(z);
      apply_activation(spec.activation, z);
    }
    activated.push_back(std::move(z));
  }
  const Matrix& out = activated.back();

  double ll = 0.0;
  Matrix delta;  // d(loglik)/d(raw outputs)
  if (grad) delta.resize(n, out.cols());

  if (spec.head == HeadKind::Classification) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = data.labels[static_cast<std::size_t>(begin + i)];
      if (y < 0 || y >= spec.num_classes)
        throw std::invalid_argument("label out of range");
      const double zmax = out.row(i).maxCoeff();
      const double lse =
          zmax + std::log((out.row(i).array() - zmax).exp().sum());
      ll += out(i, y) - lse;
      if (grad) {
        delta.row(i) = -(out.row(i).array() - lse).exp().matrix();
        delta(i, y) += 1.0;
      }
    }
  } else {
    const bool fixed = spec.head == HeadKind::RegressionFixedStd;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = data.targets[begin + i];
      const double mu = out(i, 0);
      const double rho = fixed ? 0.0 : out(i, 1);
      const double sigma =
          fixed ? spec.fixed_noise_std : softplus(rho) + kSigmaFloor;
      const double r = y - mu;
      ll += -0.5 * kLogTwoPi - std::log(sigma) - 0.5 * r * r / (sigma * sigma);
      if (grad) {
        delta(i, 0) = r / (sigma * sigma);
        if (!fixed) {
          const double dsigma =
              -1.0 / sigma + r * r / (sigma * sigma * sigma);
          delta(i, 1) = dsigma * sigmoid(rho);
        }
      }
    }
  }
  if (!std::isfinite(ll))
    throw NonFiniteError("log-likelihood is non-finite");

  if (grad) {
    // walk the packing backwards, accumulating dW / db per layer
    std::ptrdiff_t offset = params.size();
    for (std::size_t l = n_layers; l-- > 0;) {
      const int in = sizes[l], out_w = sizes[l + 1];
      offset -= out_w;
      Eigen::Map<Vector> db(grad->data() + offset, out_w);
      offset -= static_cast<std::ptrdiff_t>(in) * out_w;
      RowMajorMutMap dw(grad->data() + offset, out_w, in);
      dw.noalias() += delta.transpose() * activated[l];
      db.noalias() += delta.colwise().sum().transpose();
      if (l > 0) {
        const double* wp = params.data() + offset;
        RowMajorMap w(wp, out_w, in);
        delta = (delta * w).cwiseProduct(
            activation_grad(spec.activation, pre[l - 1]));
      }
    }
    if (!grad->allFinite())
      throw NonFiniteError("log-likelihood gradient is non-finite");
  }
  return ll;
}

double log_likelihood(const ModelSpec& spec, const ParameterVector& params,
                      const Dataset& data) {
  data.validate();
  return log_likelihood_slice(spec, params, data, 0, data.size(), nullptr);
}

ParameterVector grad_log_likelihood(const ModelSpec& spec,
                                    const ParameterVector& params,
                                    const Dataset& data) {
  data.validate();
  ParameterVector grad = ParameterVector::Zero(params.size());
  log_likelihood_slice(spec, params, data, 0, data.size(), &grad);
  return grad;
}

}  // namespace bnn
