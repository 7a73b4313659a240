#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bnn/diagnostics.hpp"
#include "bnn/prior.hpp"
#include "bnn/rng.hpp"

using namespace bnn;

namespace {

ScalarChains chains_from(std::initializer_list<std::initializer_list<double>> rows) {
  ScalarChains c;
  c.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) c.values(i, j++) = v;
    ++i;
  }
  return c;
}

ModelSpec tiny_classifier() {
  ModelSpec model;
  model.input_dim = 2;
  model.hidden_widths = {3};
  model.head = HeadKind::Classification;
  model.num_classes = 3;
  return model;
}

SampleStore random_store(const ModelSpec& model, Eigen::Index n,
                         std::uint64_t seed) {
  SampleStore store;
  const Eigen::Index dim = param_count(model);
  Rng rng(seed);
  store.samples.resize(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) store.samples(i, j) = rng.normal();
  return store;
}

}  // namespace

TEST_CASE("rhat matches the hand-computed split example exactly") {
  // chain means 1 and 11, grand mean 6: B/N = 50; within variances both 2;
  // sigma2_plus = (1/2)*2 + 50 = 51; rhat = (3/2)(51/2) - 1/4 = 38
  const auto value = rhat(chains_from({{0, 2}, {10, 12}}));
  REQUIRE(value.has_value());
  CHECK(*value == doctest::Approx(38.0).epsilon(1e-12));
}

TEST_CASE("rhat of identical short chains is one half") {
  const auto value = rhat(chains_from({{0, 2}, {0, 2}}));
  REQUIRE(value.has_value());
  CHECK(*value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("well-mixed iid chains sit within one percent of 1") {
  Rng rng(12);
  ScalarChains chains;
  chains.values.resize(4, 10000);
  for (Eigen::Index i = 0; i < chains.values.rows(); ++i)
    for (Eigen::Index j = 0; j < chains.values.cols(); ++j)
      chains.values(i, j) = 3.0 + 0.7 * rng.normal();
  const auto value = rhat(chains);
  REQUIRE(value.has_value());
  CHECK(*value > 0.99);
  CHECK(*value < 1.01);
}

TEST_CASE("rhat is invariant under affine maps and chain relabeling") {
  Rng rng(13);
  ScalarChains chains;
  chains.values.resize(3, 50);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 50; ++j)
      chains.values(i, j) = rng.normal() + (i == 0 ? 2.0 : 0.0);
  const double base = *rhat(chains);

  ScalarChains affine;
  affine.values = (-2.5 * chains.values.array() + 7.0).matrix();
  CHECK(*rhat(affine) == doctest::Approx(base).epsilon(1e-12));

  ScalarChains relabeled;
  relabeled.values = chains.values;
  relabeled.values.row(0).swap(relabeled.values.row(2));
  CHECK(*rhat(relabeled) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("internally constant chains make rhat undefined") {
  CHECK(!rhat(chains_from({{1, 1}, {5, 5}})).has_value());
  CHECK_THROWS_AS(rhat(chains_from({{1, 2}})), std::invalid_argument);
}

TEST_CASE("weight-space report covers every parameter") {
  const ModelSpec model = tiny_classifier();
  const auto a = random_store(model, 40, 1);
  SampleStore b = random_store(model, 40, 2);
  const auto report = rhat_weights({a, b});
  CHECK(report.values.size() ==
        static_cast<std::size_t>(param_count(model)));
  CHECK(report.n_undefined == 0);
  Eigen::Index total = 0;
  for (auto c : report.histogram) total += c;
  CHECK(total == static_cast<Eigen::Index>(report.values.size()));
}

TEST_CASE("identical chains give the constant-duplicate rhat value") {
  const ModelSpec model = tiny_classifier();
  const auto store = random_store(model, 25, 3);
  const auto report = rhat_weights({store, store});
  const double want = (25.0 - 1.0) / 25.0;  // B = 0 collapses the formula
  for (const auto& v : report.values) {
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("a shifted copy of a chain forces rhat far above 1") {
  const ModelSpec model = tiny_classifier();
  const auto a = random_store(model, 50, 4);
  SampleStore b = a;
  b.samples.array() += 10.0;
  const auto report = rhat_weights({a, b});
  for (const auto& v : report.values) {
    REQUIRE(v.has_value());
    CHECK(*v > 10.0);
  }
  CHECK(report.fraction_below_1p1 == 0.0);
}

TEST_CASE("function-space report covers every input and class") {
  const ModelSpec model = tiny_classifier();
  Rng rng(5);
  Matrix x(4, 2);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) x(i, j) = rng.normal();
  const auto a = random_store(model, 30, 6);
  const auto b = random_store(model, 30, 7);
  const auto report = rhat_functions({a, b}, model, x);
  CHECK(report.per_probability.values.size() == 12);
  CHECK(report.per_input.values.size() == 4);
  CHECK(report.classes_per_input == 3);
  // identical chains: every probability has the duplicate value
  const auto dup = rhat_functions({a, a}, model, x);
  for (const auto& v : dup.per_probability.values) {
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(29.0 / 30.0).epsilon(1e-12));
  }
}

TEST_CASE("report csv and json carry the undefined sentinel") {
  const auto report = make_report({1.05, std::nullopt, 2.0});
  CHECK(report.n_undefined == 1);
  CHECK(report.fraction_below_1p1 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(report.to_csv().find("undefined") != std::string::npos);
  CHECK(report.to_json().find("histogram") != std::string::npos);
  // bins: 1.05 in [1.0,1.1), 2.0 in [1.5,5)
  CHECK(report.histogram[1] == 1);
  CHECK(report.histogram[3] == 1);
}

TEST_CASE("marginal stds of a constant store are zero") {
  const ModelSpec model = tiny_classifier();
  SampleStore store = random_store(model, 10, 8);
  for (Eigen::Index i = 1; i < 10; ++i)
    store.samples.row(i) = store.samples.row(0);
  const auto report = marginal_std(store);
  CHECK(report.stds.size() == param_count(model));
  CHECK(report.stds.maxCoeff() == 0.0);
}

TEST_CASE("prior-sampled store concentrates near the prior scale") {
  PriorSpec prior;
  prior.family = PriorFamily::Gaussian;
  prior.variance = 0.25;  // alpha = 0.5
  SampleStore store;
  store.samples.resize(4000, 30);
  for (Eigen::Index i = 0; i < store.samples.rows(); ++i)
    store.samples.row(i) =
        sample_prior(prior, 30, 900 + static_cast<std::uint64_t>(i))
            .transpose();
  const auto report = marginal_std(store);
  for (Eigen::Index p = 0; p < report.stds.size(); ++p)
    CHECK(report.stds[p] == doctest::Approx(0.5).epsilon(0.05));
  Eigen::Index total = 0;
  for (auto c : report.histogram) total += c;
  CHECK(total == 30);
}

TEST_CASE("burn-in trace windows and bounds behave as documented") {
  const ModelSpec model = tiny_classifier();
  const auto store = random_store(model, 120, 10);
  Dataset test;
  Rng rng(11);
  test.inputs.resize(8, 2);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) test.inputs(i, j) = rng.normal();
  test.labels = {0, 1, 2, 0, 1, 2, 0, 1};

  const auto trace =
      burnin_trace(store, model, test, BurninMetric::Nll, {0, 10, 20});
  REQUIRE(trace.size() == 3);
  // n_bi = 0 must use exactly the first 100 samples
  std::vector<ParameterVector> first100;
  for (Eigen::Index s = 0; s < 100; ++s)
    first100.push_back(store.samples.row(s).transpose());
  const auto pred = bma_predict(first100, model, test.inputs);
  CHECK(trace[0].bma_value ==
        doctest::Approx(nll(pred, test.labels)).epsilon(1e-12));
  // the individual value is the single sample at the discard point
  const auto solo = bma_predict({store.samples.row(10).transpose()}, model,
                                test.inputs);
  CHECK(trace[1].individual_value ==
        doctest::Approx(nll(solo, test.labels)).epsilon(1e-12));

  CHECK_THROWS_AS(
      burnin_trace(store, model, test, BurninMetric::Accuracy, {120}),
      std::out_of_range);
}

TEST_CASE("a stationary store yields a flat bma trace") {
  const ModelSpec model = tiny_classifier();
  // iid draws: every window sees the same distribution
  const auto store = random_store(model, 400, 12);
  Dataset test;
  Rng rng(13);
  test.inputs.resize(6, 2);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) test.inputs(i, j) = rng.normal();
  test.labels = {0, 1, 2, 0, 1, 2};
  const auto trace = burnin_trace(store, model, test, BurninMetric::Nll,
                                  {0, 100, 200, 300}, 100);
  double lo = trace[0].bma_value, hi = trace[0].bma_value;
  for (const auto& p : trace) {
    lo = std::min(lo, p.bma_value);
    hi = std::max(hi, p.bma_value);
  }
  CHECK(hi - lo < 0.15);
}
