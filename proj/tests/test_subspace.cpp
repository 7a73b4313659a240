#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bnn/rng.hpp"
#include "bnn/subspace.hpp"

using namespace bnn;

namespace {

ParameterVector vec2(double x, double y) {
  ParameterVector v(2);
  v << x, y;
  return v;
}

PosteriorSpec scan_posterior(double temperature) {
  PosteriorSpec post;
  post.model.input_dim = 1;
  post.model.hidden_widths = {3};
  post.model.activation = Activation::Swish;
  post.model.head = HeadKind::RegressionFixedStd;
  post.model.fixed_noise_std = 0.5;
  post.prior.family = PriorFamily::Gaussian;
  post.prior.variance = 1.0;
  post.temperature = temperature;
  Rng rng(40);
  post.data.inputs.resize(20, 1);
  post.data.targets.resize(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    post.data.inputs(i, 0) = rng.normal();
    post.data.targets[i] = std::sin(post.data.inputs(i, 0)) + 0.1 * rng.normal();
  }
  return post;
}

}  // namespace

TEST_CASE("hand gram-schmidt on axis-aligned anchors") {
  const auto basis = build_subspace(vec2(0, 0), vec2(1, 0), vec2(0, 2));
  CHECK(basis.u_hat == vec2(1, 0));
  CHECK(basis.v_hat == vec2(0, 1));
  CHECK(basis.coords_w2[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(basis.coords_w2[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(basis.coords_w3[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(basis.coords_w3[1] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("origin maps back to the first anchor exactly") {
  Rng rng(41);
  ParameterVector w1(30), w2(30), w3(30);
  for (int i = 0; i < 30; ++i) {
    w1[i] = rng.normal();
    w2[i] = rng.normal();
    w3[i] = rng.normal();
  }
  const auto basis = build_subspace(w1, w2, w3);
  CHECK(basis.point(0.0, 0.0) == w1);
  CHECK(std::abs(basis.u_hat.norm() - 1.0) < 1e-10);
  CHECK(std::abs(basis.v_hat.norm() - 1.0) < 1e-10);
  CHECK(std::abs(basis.u_hat.dot(basis.v_hat)) < 1e-10);
}

TEST_CASE("stored coordinates reproduce the second and third anchors") {
  Rng rng(42);
  ParameterVector w1(50), w2(50), w3(50);
  for (int i = 0; i < 50; ++i) {
    w1[i] = rng.normal();
    w2[i] = rng.normal();
    w3[i] = rng.normal();
  }
  const auto basis = build_subspace(w1, w2, w3);
  CHECK((basis.point(basis.coords_w2[0], basis.coords_w2[1]) - w2)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  CHECK((basis.point(basis.coords_w3[0], basis.coords_w3[1]) - w3)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("point projection round-trips arbitrary coordinates") {
  Rng rng(43);
  ParameterVector w1(20), w2(20), w3(20);
  for (int i = 0; i < 20; ++i) {
    w1[i] = rng.normal();
    w2[i] = rng.normal();
    w3[i] = rng.normal();
  }
  const auto basis = build_subspace(w1, w2, w3);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = 5.0 * rng.normal(), b = 5.0 * rng.normal();
    const auto back = basis.project(basis.point(a, b));
    CHECK(std::abs(back[0] - a) < 1e-9);
    CHECK(std::abs(back[1] - b) < 1e-9);
  }
}

TEST_CASE("collinear anchors are rejected with a degeneracy error") {
  CHECK_THROWS_AS(build_subspace(vec2(0, 0), vec2(1, 1), vec2(2, 2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_subspace(vec2(0, 0), vec2(0, 0), vec2(1, 0)),
                  std::invalid_argument);
  // near-collinear below the relative threshold
  ParameterVector w3 = vec2(3.0, 3.0 + 1e-12);
  CHECK_THROWS_AS(build_subspace(vec2(0, 0), vec2(1, 1), w3),
                  std::invalid_argument);
}

TEST_CASE("default ranges pad the anchor bounding box by 20 percent") {
  const auto basis = build_subspace(vec2(0, 0), vec2(1, 0), vec2(0, 2));
  const auto ranges = default_ranges(basis);
  CHECK(ranges.a_min == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(ranges.a_max == doctest::Approx(1.2).epsilon(1e-14));
  CHECK(ranges.b_min == doctest::Approx(-0.4).epsilon(1e-14));
  CHECK(ranges.b_max == doctest::Approx(2.4).epsilon(1e-14));
}

TEST_CASE("grid values agree with direct posterior evaluation") {
  const PosteriorSpec post = scan_posterior(1.0);
  const Eigen::Index dim = param_count(post.model);
  const ParameterVector w1 = init_params(post.model, 0.5, 60);
  const ParameterVector w2 = init_params(post.model, 0.5, 61);
  const ParameterVector w3 = init_params(post.model, 0.5, 62);
  const auto basis = build_subspace(w1, w2, w3);

  // choose ranges whose lattice passes exactly through w2's coordinates
  ScanRanges ranges;
  ranges.a_min = 0.0;
  ranges.a_max = 2.0 * basis.coords_w2[0];
  ranges.b_min = -1.0;
  ranges.b_max = 1.0;
  const auto grid = scan_grid(basis, ranges, 3, post);
  // lattice point (1, 1): a = coords_w2[0], b = 0
  const ParameterVector w = basis.point(grid.a_at(1), grid.b_at(1));
  CHECK(grid.log_posterior(1, 1) ==
        doctest::Approx(log_density(post, w)).epsilon(1e-12));
  CHECK(grid.log_likelihood(1, 1) + grid.log_prior_field(1, 1) ==
        doctest::Approx(grid.log_posterior(1, 1)).epsilon(1e-12));
  CHECK(grid.log_likelihood.size() == 9);
  (void)dim;
}

TEST_CASE("tempering scales every field pointwise") {
  const auto basis = build_subspace(init_params(scan_posterior(1.0).model, 0.5, 70),
                                    init_params(scan_posterior(1.0).model, 0.5, 71),
                                    init_params(scan_posterior(1.0).model, 0.5, 72));
  const auto ranges = default_ranges(basis);
  const auto warm = scan_grid(basis, ranges, 4, scan_posterior(1.0));
  const auto hot = scan_grid(basis, ranges, 4, scan_posterior(10.0));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(hot.log_likelihood(i, j) ==
            doctest::Approx(warm.log_likelihood(i, j) / 10.0).epsilon(1e-12));
      CHECK(hot.log_posterior(i, j) ==
            doctest::Approx(warm.log_posterior(i, j) / 10.0).epsilon(1e-12));
    }
}

TEST_CASE("worker count does not change the scan") {
  const PosteriorSpec post = scan_posterior(1.0);
  const auto basis = build_subspace(init_params(post.model, 0.5, 80),
                                    init_params(post.model, 0.5, 81),
                                    init_params(post.model, 0.5, 82));
  const auto ranges = default_ranges(basis);
  const auto seq = scan_grid(basis, ranges, 5, post, 1);
  const auto par = scan_grid(basis, ranges, 5, post, 4);
  CHECK(seq.log_posterior == par.log_posterior);
  CHECK(seq.log_likelihood == par.log_likelihood);
  CHECK(seq.log_prior_field == par.log_prior_field);
}

TEST_CASE("exports carry coordinates and metadata") {
  const PosteriorSpec post = scan_posterior(1.0);
  const auto basis = build_subspace(init_params(post.model, 0.5, 90),
                                    init_params(post.model, 0.5, 91),
                                    init_params(post.model, 0.5, 92));
  const auto grid = scan_grid(basis, default_ranges(basis), 2, post);
  const std::string csv = grid.field_csv(grid.log_posterior);
  CHECK(csv.rfind("a,b,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  const std::string meta = grid.metadata_json();
  CHECK(meta.find("resolution") != std::string::npos);
  CHECK(meta.find("temperature") != std::string::npos);
  CHECK_THROWS_AS(scan_grid(basis, default_ranges(basis), 1, post),
                  std::invalid_argument);
}
