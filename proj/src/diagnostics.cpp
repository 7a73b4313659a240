#include "bnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bnn {
namespace {

int rhat_bin(double value) {
  int k = 0;
  while (k < kRhatBinCount - 1 && value >= kRhatBinEdges[static_cast<std::size_t>(k)])
    ++k;
  return k;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

void require_aligned_stores(const std::vector<SampleStore>& stores) {
  if (stores.size() < 2)
    throw std::invalid_argument("rhat needs at least 2 chains");
  for (const auto& s : stores) {
    if (s.samples.rows() < 2)
      throw std::invalid_argument("rhat needs at least 2 iterations per chain");
    if (s.samples.rows() != stores[0].samples.rows() ||
        s.samples.cols() != stores[0].samples.cols())
      throw std::invalid_argument("stores have mismatched shapes");
  }
}

}  // namespace

std::optional<double> rhat(const ScalarChains& chains) {
  const Eigen::Index m = chains.n_chains();
  const Eigen::Index n = chains.n_iterations();
  if (m < 2 || n < 2)
    throw std::invalid_argument("rhat needs M >= 2 chains and N >= 2 iterations");

  const Vector chain_means = chains.values.rowwise().mean();
  const double grand_mean = chain_means.mean();

  // B/N = (1/(M-1)) sum_m (chain mean - grand mean)^2
  const double b_over_n =
      (chain_means.array() - grand_mean).square().sum() / (m - 1);

  // W = (1/M) sum_m s_m^2, with s_m^2 the unbiased within-chain variance
  double w = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    w += (chains.values.row(i).array() - chain_means[i]).square().sum() /
         (n - 1);
  w /= static_cast<double>(m);

  if (w == 0.0) return std::nullopt;

  const double sigma2_plus =
      (static_cast<double>(n - 1) / n) * w + b_over_n;
  return (static_cast<double>(m + 1) / m) * (sigma2_plus / w) -
         static_cast<double>(n - 1) / (static_cast<double>(m) * n);
}

RhatReport make_report(const std::vector<std::optional<double>>& values) {
  RhatReport report;
  report.values = values;
  Eigen::Index defined = 0, below = 0;
  for (const auto& v : values) {
    if (!v) {
      ++report.n_undefined;
      continue;
    }
    ++defined;
    if (*v < 1.1) ++below;
    ++report.histogram[static_cast<std::size_t>(rhat_bin(*v))];
  }
  report.fraction_below_1p1 =
      defined > 0 ? static_cast<double>(below) / defined : 0.0;
  return report;
}

std::string RhatReport::to_csv() const {
  std::ostringstream out;
  out << "index,rhat\n";
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << i << ',';
    if (values[i])
      out << *values[i];
    else
      out << "undefined";
    out << '\n';
  }
  return out.str();
}

std::string RhatReport::to_json() const {
  nlohmann::json j;
  j["n_quantities"] = values.size();
  j["n_undefined"] = n_undefined;
  j["fraction_below_1.1"] = fraction_below_1p1;
  j["histogram"] = {{"edges", std::vector<double>(kRhatBinEdges.begin(),
                                                  kRhatBinEdges.end())},
                    {"counts", histogram},
                    {"y_scale", "log"}};
  return j.dump(2);
}

RhatReport rhat_weights(const std::vector<SampleStore>& stores) {
  require_aligned_stores(stores);
  const Eigen::Index dim = stores[0].samples.cols();
  const Eigen::Index n = stores[0].samples.rows();
  std::vector<std::optional<double>> values(static_cast<std::size_t>(dim));
  ScalarChains chains;
  chains.values.resize(static_cast<Eigen::Index>(stores.size()), n);
  for (Eigen::Index p = 0; p < dim; ++p) {
    for (std::size_t c = 0; c < stores.size(); ++c)
      chains.values.row(static_cast<Eigen::Index>(c)) =
          stores[c].samples.col(p).transpose();
    values[static_cast<std::size_t>(p)] = rhat(chains);
  }
  return make_report(values);
}

FunctionRhatReport rhat_functions(const std::vector<SampleStore>& stores,
                                  const ModelSpec& model,
                                  const Matrix& inputs) {
  require_aligned_stores(stores);
  if (!model.is_classification())
    throw std::invalid_argument("function-space rhat requires classification");
  const Eigen::Index n_in = inputs.rows();
  const Eigen::Index c = model.num_classes;
  const Eigen::Index n = stores[0].samples.rows();
  const Eigen::Index m = static_cast<Eigen::Index>(stores.size());

  // probs[chain] is (iterations) x (inputs * classes), input-major
  std::vector<Matrix> probs(static_cast<std::size_t>(m));
  for (Eigen::Index chain = 0; chain < m; ++chain) {
    Matrix& block = probs[static_cast<std::size_t>(chain)];
    block.resize(n, n_in * c);
    for (Eigen::Index s = 0; s < n; ++s) {
      const ParameterVector w =
          stores[static_cast<std::size_t>(chain)].samples.row(s).transpose();
      const Matrix p = softmax_rows(forward(model, w, inputs));
      for (Eigen::Index i = 0; i < n_in; ++i)
        block.row(s).segment(i * c, c) = p.row(i);
    }
  }

  std::vector<std::optional<double>> per_prob(
      static_cast<std::size_t>(n_in * c));
  ScalarChains chains;
  chains.values.resize(m, n);
  for (Eigen::Index q = 0; q < n_in * c; ++q) {
    for (Eigen::Index chain = 0; chain < m; ++chain)
      chains.values.row(chain) =
          probs[static_cast<std::size_t>(chain)].col(q).transpose();
    per_prob[static_cast<std::size_t>(q)] = rhat(chains);
  }

  // per input: worst (max) class rhat; undefined only if all classes undefined
  std::vector<std::optional<double>> per_input(static_cast<std::size_t>(n_in));
  for (Eigen::Index i = 0; i < n_in; ++i) {
    std::optional<double> worst;
    for (Eigen::Index j = 0; j < c; ++j) {
      const auto& v = per_prob[static_cast<std::size_t>(i * c + j)];
      if (v && (!worst || *v > *worst)) worst = *v;
    }
    per_input[static_cast<std::size_t>(i)] = worst;
  }

  FunctionRhatReport report;
  report.per_probability = make_report(per_prob);
  report.per_input = make_report(per_input);
  report.classes_per_input = static_cast<int>(c);
  return report;
}

MarginalStdReport marginal_std(const SampleStore& store, int n_bins) {
  if (store.samples.rows() < 2)
    throw std::invalid_argument("marginal std needs at least 2 samples");
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  MarginalStdReport report;
  const Eigen::Index n = store.samples.rows();
  const Eigen::RowVectorXd mean = store.samples.colwise().mean();
  report.stds =
      ((store.samples.rowwise() - mean).array().square().colwise().sum() /
       (n - 1))
          .sqrt()
          .transpose();
  // constant columns are exactly 0, not mean-subtraction rounding noise
  for (Eigen::Index p = 0; p < report.stds.size(); ++p)
    if (store.samples.col(p).maxCoeff() == store.samples.col(p).minCoeff())
      report.stds[p] = 0.0;

  const double lo = report.stds.minCoeff();
  const double hi = report.stds.maxCoeff();
  const double width = hi > lo ? (hi - lo) / n_bins : 1.0;
  report.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int k = 0; k <= n_bins; ++k)
    report.bin_edges[static_cast<std::size_t>(k)] = lo + k * width;
  report.histogram.assign(static_cast<std::size_t>(n_bins), 0);
  for (Eigen::Index p = 0; p < report.stds.size(); ++p) {
    int k = static_cast<int>((report.stds[p] - lo) / width);
    k = std::clamp(k, 0, n_bins - 1);
    ++report.histogram[static_cast<std::size_t>(k)];
  }
  return report;
}

std::vector<BurninPoint> burnin_trace(const SampleStore& store,
                                      const ModelSpec& model,
                                      const Dataset& test,
                                      BurninMetric metric,
                                      const std::vector<Eigen::Index>& grid,
                                      Eigen::Index window) {
  const Eigen::Index n = store.samples.rows();
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  for (Eigen::Index n_bi : grid)
    if (n_bi < 0 || n_bi >= n)
      throw std::out_of_range("burn-in grid exceeds the store length");

  auto eval = [&](const std::vector<ParameterVector>& samples) {
    const auto pred = bma_predict(samples, model, test.inputs);
    return metric == BurninMetric::Accuracy ? accuracy(pred, test.labels)
                                            : nll(pred, test.labels);
  };

  std::vector<BurninPoint> trace;
  for (Eigen::Index n_bi : grid) {
    const Eigen::Index end = std::min(n, n_bi + window);
    std::vector<ParameterVector> samples;
    for (Eigen::Index s = n_bi; s < end; ++s)
      samples.push_back(store.samples.row(s).transpose());
    BurninPoint point;
    point.n_burnin = n_bi;
    point.bma_value = eval(samples);
    point.individual_value = eval({store.samples.row(n_bi).transpose()});
    trace.push_back(point);
  }
  return trace;
}

}  // namespace bnn
