#include "bnn/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace bnn {
namespace {

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Eigen::Index argmax_row(const Matrix& values, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < values.cols(); ++j)
    if (values(row, j) > values(row, best)) best = j;
  return best;
}

void require_labels(const PredictiveDistribution& pred,
                    const std::vector<int>& labels) {
  if (!pred.classification)
    throw std::invalid_argument("classification predictive required");
  if (static_cast<Eigen::Index>(labels.size()) != pred.size())
    throw std::invalid_argument("label count does not match predictions");
  for (int y : labels)
    if (y < 0 || y >= pred.values.cols())
      throw std::invalid_argument("label out of range");
}

void require_same_shape(const PredictiveDistribution& a,
                        const PredictiveDistribution& b) {
  if (!a.classification || !b.classification)
    throw std::invalid_argument("classification predictives required");
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw std::invalid_argument("predictive shapes do not match");
}

}  // namespace

void PredictiveDistribution::validate() const {
  if (values.rows() == 0) throw std::invalid_argument("empty predictive");
  if (classification) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (std::abs(values.row(i).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("predictive row does not sum to 1");
      if (values.row(i).minCoeff() < 0.0)
        throw std::invalid_argument("negative class probability");
    }
  } else {
    if (values.cols() != 2)
      throw std::invalid_argument("regression predictive must be (mean, std)");
    if (values.col(1).minCoeff() <= 0.0)
      throw std::invalid_argument("non-positive predictive std");
  }
}

PredictiveDistribution bma_predict(const std::vector<ParameterVector>& samples,
                                   const ModelSpec& model,
                                   const Matrix& inputs) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const std::int64_t dim = param_count(model);
  for (const auto& w : samples)
    if (w.size() != dim)
      throw std::invalid_argument("sample length does not match the model");

  PredictiveDistribution pred;
  const double inv_m = 1.0 / static_cast<double>(samples.size());
  if (model.is_classification()) {
    pred.classification = true;
    pred.values = Matrix::Zero(inputs.rows(), model.num_classes);
    for (const auto& w : samples)
      pred.values += inv_m * softmax_rows(forward(model, w, inputs));
  } else {
    pred.classification = false;
    Vector mean_mu = Vector::Zero(inputs.rows());
    Vector mean_sq = Vector::Zero(inputs.rows());  // mean of sigma^2 + mu^2
    for (const auto& w : samples) {
      const Matrix ms = forward_mean_std(model, w, inputs);
      mean_mu += inv_m * ms.col(0);
      mean_sq +=
          inv_m * (ms.col(0).array().square() + ms.col(1).array().square())
                      .matrix();
    }
    pred.values.resize(inputs.rows(), 2);
    pred.values.col(0) = mean_mu;
    pred.values.col(1) =
        (mean_sq.array() - mean_mu.array().square()).max(0.0).sqrt();
  }
  return pred;
}

PredictiveDistribution bma_predict(const SampleStore& store,
                                   const ModelSpec& model,
                                   const Matrix& inputs) {
  return bma_predict(store_samples(store), model, inputs);
}

std::vector<ParameterVector> store_samples(const SampleStore& store) {
  std::vector<ParameterVector> out;
  out.reserve(static_cast<std::size_t>(store.samples.rows()));
  for (Eigen::Index i = 0; i < store.samples.rows(); ++i)
    out.push_back(store.samples.row(i).transpose());
  return out;
}

double accuracy(const PredictiveDistribution& pred,
                const std::vector<int>& labels) {
  require_labels(pred, labels);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    if (argmax_row(pred.values, i) == labels[static_cast<std::size_t>(i)])
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double nll(const PredictiveDistribution& pred, const std::vector<int>& labels) {
  require_labels(pred, labels);
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    total -= std::log(pred.values(i, labels[static_cast<std::size_t>(i)]));
  return total / static_cast<double>(pred.size());
}

double rmse(const PredictiveDistribution& pred, const Vector& targets) {
  if (pred.classification)
    throw std::invalid_argument("regression predictive required");
  if (targets.size() != pred.size())
    throw std::invalid_argument("target count does not match predictions");
  return std::sqrt(
      (pred.values.col(0) - targets).squaredNorm() /
      static_cast<double>(pred.size()));
}

double gaussian_test_ll(const std::vector<ParameterVector>& samples,
                        const ModelSpec& model, const Matrix& inputs,
                        const Vector& targets) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  if (targets.size() != inputs.rows())
    throw std::invalid_argument("target count does not match inputs");
  // per input: logsumexp over samples of the Gaussian log-density, minus log M
  Matrix logp(inputs.rows(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Matrix ms = forward_mean_std(model, samples[s], inputs);
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
      const double mu = ms(i, 0), sigma = ms(i, 1);
      const double z = (targets[i] - mu) / sigma;
      logp(i, static_cast<Eigen::Index>(s)) =
          -0.5 * z * z - std::log(sigma) -
          0.5 * std::log(2.0 * std::numbers::pi);
    }
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const double m = logp.row(i).maxCoeff();
    total += m + std::log((logp.row(i).array() - m).exp().sum()) -
             std::log(static_cast<double>(samples.size()));
  }
  return total / static_cast<double>(inputs.rows());
}

std::vector<CalibrationBin> calibration_curve(const PredictiveDistribution& pred,
                                              const std::vector<int>& labels,
                                              int n_bins) {
  require_labels(pred, labels);
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  std::vector<CalibrationBin> bins(static_cast<std::size_t>(n_bins));
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const Eigen::Index top = argmax_row(pred.values, i);
    const double conf = pred.values(i, top);
    int k = static_cast<int>(conf * n_bins);
    k = std::clamp(k, 0, n_bins - 1);  // confidence 1.0 lands in the top bin
    auto& bin = bins[static_cast<std::size_t>(k)];
    bin.confidence += conf;
    bin.accuracy += (top == labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
    bin.count += 1;
  }
  std::vector<CalibrationBin> curve;
  for (auto& bin : bins) {
    if (bin.count == 0) continue;
    bin.confidence /= static_cast<double>(bin.count);
    bin.accuracy /= static_cast<double>(bin.count);
    curve.push_back(bin);
  }
  return curve;
}

double ece(const PredictiveDistribution& pred, const std::vector<int>& labels,
           int n_bins) {
  const auto curve = calibration_curve(pred, labels, n_bins);
  double total = 0.0;
  for (const auto& bin : curve)
    total += static_cast<double>(bin.count) *
             std::abs(bin.accuracy - bin.confidence);
  return total / static_cast<double>(pred.size());
}

double agreement(const PredictiveDistribution& p_ref,
                 const PredictiveDistribution& p) {
  require_same_shape(p_ref, p);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < p_ref.size(); ++i)
    if (argmax_row(p_ref.values, i) == argmax_row(p.values, i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(p_ref.size());
}

double total_variation(const PredictiveDistribution& p_ref,
                       const PredictiveDistribution& p) {
  require_same_shape(p_ref, p);
  return 0.5 * (p_ref.values - p.values).cwiseAbs().rowwise().sum().mean();
}

Vector predictive_entropy(const PredictiveDistribution& pred) {
  if (!pred.classification)
    throw std::invalid_argument("classification predictive required");
  Vector h(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < pred.values.cols(); ++j) {
      const double pij = pred.values(i, j);
      if (pij > 0.0) total -= pij * std::log(pij);
    }
    h[i] = total;
  }
  return h;
}

double ood_auc_roc(const std::vector<double>& confidences_in,
                   const std::vector<double>& confidences_out) {
  if (confidences_in.empty() || confidences_out.empty())
    throw std::invalid_argument("both confidence sets must be non-empty");
  // midrank AUC: rank the pooled values, average ranks over ties
  struct Entry {
    double value;
    bool in;
  };
  std::vector<Entry> pooled;
  pooled.reserve(confidences_in.size() + confidences_out.size());
  for (double v : confidences_in) pooled.push_back({v, true});
  for (double v : confidences_out) pooled.push_back({v, false});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });
  double rank_sum_in = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].value == pooled[i].value) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].in) rank_sum_in += midrank;
    i = j;
  }
  const double n_in = static_cast<double>(confidences_in.size());
  const double n_out = static_cast<double>(confidences_out.size());
  return (rank_sum_in - n_in * (n_in + 1.0) / 2.0) / (n_in * n_out);
}

std::vector<double> confidences(const PredictiveDistribution& pred) {
  if (!pred.classification)
    throw std::invalid_argument("classification predictive required");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(pred.size()));
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    out.push_back(pred.values(i, argmax_row(pred.values, i)));
  return out;
}

std::vector<double> true_class_trace(const SampleStore& store,
                                     const ModelSpec& model,
                                     const Eigen::RowVectorXd& input,
                                     int label) {
  if (!model.is_classification())
    throw std::invalid_argument("classification model required");
  if (label < 0 || label >= model.num_classes)
    throw std::invalid_argument("label out of range");
  std::vector<double> series;
  series.reserve(static_cast<std::size_t>(store.samples.rows()));
  for (Eigen::Index s = 0; s < store.samples.rows(); ++s) {
    const ParameterVector w = store.samples.row(s).transpose();
    const Matrix p = softmax_rows(forward(model, w, input));
    series.push_back(p(0, label));
  }
  return series;
}

}  // namespace bnn
