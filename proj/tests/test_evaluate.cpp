#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "bnn/evaluate.hpp"
#include "bnn/rng.hpp"
#include "oracles.hpp"

using namespace bnn;

namespace {

PredictiveDistribution make_pred(std::initializer_list<std::initializer_list<double>> rows) {
  PredictiveDistribution pred;
  pred.values.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) pred.values(i, j++) = v;
    ++i;
  }
  return pred;
}

// bias-only binary classifier: logits at x = 0 are exactly the two biases
ModelSpec bias_classifier() {
  ModelSpec model;
  model.input_dim = 1;
  model.hidden_widths = {};
  model.activation = Activation::Identity;
  model.head = HeadKind::Classification;
  model.num_classes = 2;
  return model;
}

// packing for the linear layer: W (2x1 row-major), then biases
ParameterVector bias_params(double b0, double b1) {
  ParameterVector w(4);
  w << 0.0, 0.0, b0, b1;
  return w;
}

ModelSpec bias_regressor() {
  ModelSpec model;
  model.input_dim = 1;
  model.hidden_widths = {};
  model.activation = Activation::Identity;
  model.head = HeadKind::RegressionMeanStd;
  return model;
}

ParameterVector regressor_params(double mu, double sigma) {
  ParameterVector w(4);
  // invert sigma = softplus(rho) + floor
  w << 0.0, 0.0, mu, std::log(std::expm1(sigma - kSigmaFloor));
  return w;
}

}  // namespace

TEST_CASE("single-sample bma is that sample's predictive") {
  const ModelSpec model = bias_classifier();
  const Matrix x = Matrix::Zero(1, 1);
  const ParameterVector w = bias_params(1.3, -0.4);
  const auto pred = bma_predict({w}, model, x);
  const double z = std::exp(1.3) + std::exp(-0.4);
  CHECK(pred.values(0, 0) == doctest::Approx(std::exp(1.3) / z).epsilon(1e-14));
  CHECK(pred.values(0, 1) == doctest::Approx(std::exp(-0.4) / z).epsilon(1e-14));
}

TEST_CASE("opposite near-one-hot samples average to one half") {
  const ModelSpec model = bias_classifier();
  const Matrix x = Matrix::Zero(1, 1);
  const auto pred = bma_predict(
      {bias_params(50.0, -50.0), bias_params(-50.0, 50.0)}, model, x);
  CHECK(pred.values(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(pred.values(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
  pred.validate();
}

TEST_CASE("bma rows stay row-stochastic for random models") {
  ModelSpec model;
  model.input_dim = 3;
  model.hidden_widths = {5};
  model.head = HeadKind::Classification;
  model.num_classes = 4;
  Rng rng(2);
  Matrix x(6, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i / 3, i % 3) = rng.normal();
  std::vector<ParameterVector> samples;
  for (int s = 0; s < 7; ++s) samples.push_back(init_params(model, 1.0, 90 + s));
  const auto pred = bma_predict(samples, model, x);
  pred.validate();
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    CHECK(std::abs(pred.values.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("regression bma with equal means reduces to rms of stds") {
  const ModelSpec model = bias_regressor();
  const Matrix x = Matrix::Zero(1, 1);
  const auto pred = bma_predict(
      {regressor_params(2.0, 0.3), regressor_params(2.0, 0.7)}, model, x);
  CHECK(!pred.classification);
  CHECK(pred.values(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  const double rms = std::sqrt((0.3 * 0.3 + 0.7 * 0.7) / 2.0);
  CHECK(pred.values(0, 1) == doctest::Approx(rms).epsilon(1e-9));
}

TEST_CASE("regression bma spreads by the variance of the means") {
  const ModelSpec model = bias_regressor();
  const Matrix x = Matrix::Zero(1, 1);
  const auto pred = bma_predict(
      {regressor_params(1.0, 0.5), regressor_params(3.0, 0.5)}, model, x);
  CHECK(pred.values(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  // total variance = mean sigma^2 + var of mu = 0.25 + 1
  CHECK(pred.values(0, 1) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-9));
}

TEST_CASE("accuracy and nll on perfect and uniform predictions") {
  const auto perfect = make_pred({{1.0, 0.0}, {0.0, 1.0}});
  CHECK(accuracy(perfect, {0, 1}) == 1.0);
  CHECK(nll(perfect, {0, 1}) == 0.0);
  const auto uniform = make_pred({{0.25, 0.25, 0.25, 0.25}});
  CHECK(nll(uniform, {2}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(accuracy(make_pred({{0.6, 0.4}, {0.6, 0.4}}), {0, 1}) == 0.5);
}

TEST_CASE("rmse agrees with a hand-computed three-point value") {
  PredictiveDistribution pred;
  pred.classification = false;
  pred.values.resize(3, 2);
  pred.values << 1.0, 0.1, 2.0, 0.1, 3.0, 0.1;
  Vector y(3);
  y << 1.5, 2.0, 1.0;
  CHECK(rmse(pred, y) ==
        doctest::Approx(std::sqrt((0.25 + 0.0 + 4.0) / 3.0)).epsilon(1e-14));
}

TEST_CASE("gaussian test log-likelihood is the log mixture density") {
  const ModelSpec model = bias_regressor();
  const Matrix x = Matrix::Zero(1, 1);
  Vector y(1);
  y << 0.8;
  const std::vector<ParameterVector> samples = {regressor_params(1.0, 0.5),
                                                regressor_params(-0.2, 1.5)};
  auto normal_pdf = [](double t, double mu, double s) {
    return std::exp(-0.5 * (t - mu) * (t - mu) / (s * s)) /
           (s * std::sqrt(2.0 * std::numbers::pi));
  };
  const double want =
      std::log(0.5 * (normal_pdf(0.8, 1.0, 0.5) + normal_pdf(0.8, -0.2, 1.5)));
  CHECK(gaussian_test_ll(samples, model, x, y) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("ece hand example and trivial zero") {
  const auto confident = make_pred({{1.0, 0.0}, {1.0, 0.0}});
  CHECK(ece(confident, {0, 0}, 10) == 0.0);
  // 4 predictions at confidence 0.8, 3 correct, a single bin
  const auto pred = make_pred(
      {{0.8, 0.2}, {0.8, 0.2}, {0.8, 0.2}, {0.8, 0.2}});
  CHECK(ece(pred, {0, 0, 0, 1}, 1) == doctest::Approx(0.05).epsilon(1e-14));
  const auto curve = calibration_curve(pred, {0, 0, 0, 1}, 1);
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].confidence == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(curve[0].accuracy == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(curve[0].count == 4);
}

TEST_CASE("ece is invariant to permuting the examples") {
  Rng rng(4);
  PredictiveDistribution pred;
  pred.values.resize(50, 3);
  std::vector<int> labels(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    Eigen::Vector3d u;
    for (int j = 0; j < 3; ++j) u[j] = -std::log(rng.uniform());
    pred.values.row(i) = (u / u.sum()).transpose();
    labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(3));
  }
  const double base = ece(pred, labels);

  std::vector<Eigen::Index> order(50);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  PredictiveDistribution perm;
  perm.values.resize(50, 3);
  std::vector<int> perm_labels(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    perm.values.row(i) = pred.values.row(order[static_cast<std::size_t>(i)]);
    perm_labels[static_cast<std::size_t>(i)] =
        labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }
  CHECK(ece(perm, perm_labels) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("agreement counts matching argmax rows") {
  const auto ref = make_pred({{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}});
  CHECK(agreement(ref, ref) == 1.0);
  const auto other = make_pred({{0.7, 0.3}, {0.9, 0.1}, {0.55, 0.45}});
  CHECK(agreement(ref, other) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  // argmax-preserving rescaling cannot change the answer
  PredictiveDistribution scaled = other;
  scaled.values = 0.5 * (scaled.values.array() + 0.25).matrix();
  CHECK(agreement(ref, scaled) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("argmax ties break toward the lowest class index") {
  const auto tie = make_pred({{0.5, 0.5}});
  const auto first = make_pred({{0.6, 0.4}});
  const auto second = make_pred({{0.4, 0.6}});
  CHECK(agreement(tie, first) == 1.0);
  CHECK(agreement(tie, second) == 0.0);
}

TEST_CASE("total variation hand values and bounds") {
  const auto a = make_pred({{0.8, 0.2}});
  const auto b = make_pred({{0.6, 0.4}});
  CHECK(total_variation(a, a) == 0.0);
  CHECK(total_variation(a, b) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(total_variation(b, a) == doctest::Approx(0.2).epsilon(1e-14));
  const auto onehot1 = make_pred({{1.0, 0.0}});
  const auto onehot2 = make_pred({{0.0, 1.0}});
  CHECK(total_variation(onehot1, onehot2) == 1.0);
}

TEST_CASE("predictive entropy hand values") {
  const auto pred = make_pred(
      {{1.0, 0.0, 0.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.5, 0.25, 0.25}});
  const Vector h = predictive_entropy(pred);
  CHECK(h[0] == 0.0);
  CHECK(h[1] == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(h[2] == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("auc-roc pair enumeration and edge cases") {
  CHECK(ood_auc_roc({0.9, 0.8}, {0.2, 0.1}) == 1.0);
  CHECK(ood_auc_roc({0.5, 0.7}, {0.5, 0.7}) == 0.5);
  CHECK(ood_auc_roc({0.9, 0.7}, {0.8, 0.6}) ==
        doctest::Approx(0.75).epsilon(1e-14));
  // one tied pair out of four counts one half: 3.5 / 4
  CHECK(ood_auc_roc({0.9, 0.7}, {0.7, 0.6}) ==
        doctest::Approx(0.875).epsilon(1e-14));
  CHECK(ood_auc_roc({0.5}, {0.5}) == 0.5);  // single tied pair
}

TEST_CASE("auc-roc is invariant under monotone transforms") {
  Rng rng(6);
  std::vector<double> in(40), out(60);
  for (auto& v : in) v = rng.uniform();
  for (auto& v : out) v = 0.8 * rng.uniform();
  const double base = ood_auc_roc(in, out);
  auto warp = [](std::vector<double> v) {
    for (auto& x : v) x = std::exp(3.0 * x) - 7.0;
    return v;
  };
  CHECK(ood_auc_roc(warp(in), warp(out)) ==
        doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("true-class trace matches the bma probability on average") {
  ModelSpec model;
  model.input_dim = 2;
  model.hidden_widths = {4};
  model.head = HeadKind::Classification;
  model.num_classes = 3;
  SampleStore store;
  const Eigen::Index dim = param_count(model);
  store.samples.resize(9, dim);
  for (Eigen::Index s = 0; s < 9; ++s)
    store.samples.row(s) =
        init_params(model, 0.8, 200 + static_cast<std::uint64_t>(s)).transpose();
  Eigen::RowVectorXd x(2);
  x << 0.3, -1.1;

  const auto series = true_class_trace(store, model, x, 1);
  REQUIRE(series.size() == 9);
  const double mean =
      std::accumulate(series.begin(), series.end(), 0.0) / series.size();
  const auto pred = bma_predict(store, model, x);
  CHECK(mean == doctest::Approx(pred.values(0, 1)).epsilon(1e-12));

  // constant store gives a constant series
  for (Eigen::Index s = 0; s < 9; ++s)
    store.samples.row(s) = store.samples.row(0);
  const auto flat = true_class_trace(store, model, x, 1);
  for (double v : flat) CHECK(v == flat[0]);
}

TEST_CASE("confidences pick the top class probability") {
  const auto pred = make_pred({{0.7, 0.3}, {0.1, 0.9}});
  const auto conf = confidences(pred);
  REQUIRE(conf.size() == 2);
  CHECK(conf[0] == 0.7);
  CHECK(conf[1] == 0.9);
}

TEST_CASE("shape and argument validation") {
  const auto pred = make_pred({{0.7, 0.3}});
  CHECK_THROWS_AS(accuracy(pred, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(nll(pred, {5}), std::invalid_argument);
  CHECK_THROWS_AS(agreement(pred, make_pred({{0.5, 0.25, 0.25}})),
                  std::invalid_argument);
  CHECK_THROWS_AS(ood_auc_roc({}, {0.5}), std::invalid_argument);
  PredictiveDistribution bad = pred;
  bad.values(0, 0) = 0.9;  // row sums to 1.2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ModelSpec model = bias_classifier();
  CHECK_THROWS_AS(bma_predict(std::vector<ParameterVector>{},
                              model, Matrix::Zero(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(bma_predict({ParameterVector::Zero(3)}, model,
                              Matrix::Zero(1, 1)),
                  std::invalid_argument);
}
