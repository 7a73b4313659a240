#include "bnn/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bnn/errors.hpp"

namespace bnn {

ParameterVector SubspaceBasis::point(double a, double b) const {
  return origin + a * u_hat + b * v_hat;
}

std::array<double, 2> SubspaceBasis::project(const ParameterVector& w) const {
  const ParameterVector d = w - origin;
  return {u_hat.dot(d), v_hat.dot(d)};
}

SubspaceBasis build_subspace(const ParameterVector& w1,
                             const ParameterVector& w2,
                             const ParameterVector& w3) {
  if (w1.size() != w2.size() || w1.size() != w3.size())
    throw std::invalid_argument("anchor dimensions do not match");
  SubspaceBasis basis;
  basis.origin = w1;
  basis.u = w2 - w1;
  basis.v = w3 - w1;
  const double u_norm = basis.u.norm();
  if (u_norm == 0.0)
    throw std::invalid_argument("degenerate subspace: w2 equals w1");
  basis.u_hat = basis.u / u_norm;
  const ParameterVector residual = basis.v - basis.u_hat.dot(basis.v) * basis.u_hat;
  const double r_norm = residual.norm();
  if (r_norm <= 1e-8 * basis.v.norm())
    throw std::invalid_argument(
        "degenerate subspace: the three anchors are collinear");
  basis.v_hat = residual / r_norm;
  basis.coords_w2 = basis.project(w2);
  basis.coords_w3 = basis.project(w3);
  return basis;
}

ScanRanges default_ranges(const SubspaceBasis& basis) {
  auto expand = [](double lo, double hi) {
    const double pad = 0.2 * (hi - lo);
    return std::array<double, 2>{lo - pad, hi + pad};
  };
  const double a_lo =
      std::min({0.0, basis.coords_w2[0], basis.coords_w3[0]});
  const double a_hi =
      std::max({0.0, basis.coords_w2[0], basis.coords_w3[0]});
  const double b_lo =
      std::min({0.0, basis.coords_w2[1], basis.coords_w3[1]});
  const double b_hi =
      std::max({0.0, basis.coords_w2[1], basis.coords_w3[1]});
  ScanRanges ranges;
  const auto a = expand(a_lo, a_hi);
  const auto b = expand(b_lo, b_hi);
  ranges.a_min = a[0];
  ranges.a_max = a[1];
  ranges.b_min = b[0];
  ranges.b_max = b[1];
  return ranges;
}

double SubspaceGrid::a_at(int i) const {
  return ranges.a_min + (ranges.a_max - ranges.a_min) * i / (resolution - 1);
}

double SubspaceGrid::b_at(int j) const {
  return ranges.b_min + (ranges.b_max - ranges.b_min) * j / (resolution - 1);
}

std::string SubspaceGrid::field_csv(const Matrix& field) const {
  std::ostringstream out;
  out.precision(17);
  out << "a,b,value\n";
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j)
      out << a_at(i) << ',' << b_at(j) << ',' << field(i, j) << '\n';
  return out.str();
}

std::string SubspaceGrid::metadata_json() const {
  nlohmann::json j;
  j["resolution"] = resolution;
  j["temperature"] = temperature;
  j["ranges"] = {{"a_min", ranges.a_min},
                 {"a_max", ranges.a_max},
                 {"b_min", ranges.b_min},
                 {"b_max", ranges.b_max}};
  j["anchors"] = {{"w1", {0.0, 0.0}},
                  {"w2", {basis.coords_w2[0], basis.coords_w2[1]}},
                  {"w3", {basis.coords_w3[0], basis.coords_w3[1]}}};
  j["layout"] = "row-major, row index = a, column index = b";
  j["sentinel"] = "-inf marks non-finite evaluations";
  return j.dump(2);
}

SubspaceGrid scan_grid(const SubspaceBasis& basis, const ScanRanges& ranges,
                       int resolution, const PosteriorSpec& post,
                       int workers) {
  if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  post.validate();
  SubspaceGrid grid;
  grid.basis = basis;
  grid.ranges = ranges;
  grid.resolution = resolution;
  grid.temperature = post.temperature;
  grid.log_likelihood.resize(resolution, resolution);
  grid.log_prior_field.resize(resolution, resolution);
  grid.log_posterior.resize(resolution, resolution);

  const int total = resolution * resolution;
  auto eval_point = [&](int idx) {
    const int i = idx / resolution, j = idx % resolution;
    const ParameterVector w = basis.point(grid.a_at(i), grid.b_at(j));
    double ll, lp;
    try {
      ll = log_likelihood(post.model, w, post.data) / post.temperature;
      lp = log_prior(post.prior, w) / post.temperature;
      if (!std::isfinite(ll)) ll = kScanSentinel;
      if (!std::isfinite(lp)) lp = kScanSentinel;
    } catch (const NonFiniteError&) {
      ll = kScanSentinel;
      lp = kScanSentinel;
    }
    grid.log_likelihood(i, j) = ll;
    grid.log_prior_field(i, j) = lp;
    grid.log_posterior(i, j) =
        (ll == kScanSentinel || lp == kScanSentinel) ? kScanSentinel : ll + lp;
  };

  workers = std::min(workers, total);
  if (workers == 1) {
    for (int idx = 0; idx < total; ++idx) eval_point(idx);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (int idx = t; idx < total; idx += workers) eval_point(idx);
      });
    for (auto& th : pool) th.join();
  }
  return grid;
}

}  // namespace bnn
