#pragma once

#include <array>
#include <limits>
#include <string>

#include "bnn/posterior.hpp"

namespace bnn {

// Unique 2D affine subspace through three points: origin w1, orthonormal
// (u_hat, v_hat) from Gram-Schmidt on u = w2 - w1, v = w3 - w1.
struct SubspaceBasis {
  ParameterVector origin;
  ParameterVector u_hat, v_hat;
  ParameterVector u, v;               // raw spans
  std::array<double, 2> coords_w2{};  // (a, b) of w2 in the basis
  std::array<double, 2> coords_w3{};

  ParameterVector point(double a, double b) const;
  std::array<double, 2> project(const ParameterVector& w) const;
};

SubspaceBasis build_subspace(const ParameterVector& w1,
                             const ParameterVector& w2,
                             const ParameterVector& w3);

struct ScanRanges {
  double a_min = 0.0, a_max = 1.0;
  double b_min = 0.0, b_max = 1.0;
};

// Bounding box of (0,0), coords_w2, coords_w3, each side expanded 20%.
ScanRanges default_ranges(const SubspaceBasis& basis);

inline constexpr double kScanSentinel =
    -std::numeric_limits<double>::infinity();

struct SubspaceGrid {
  SubspaceBasis basis;
  ScanRanges ranges;
  int resolution = 0;
  double temperature = 1.0;
  // row index = a, column index = b; non-finite evaluations recorded as the
  // sentinel and the scan continues
  Matrix log_likelihood;
  Matrix log_prior_field;
  Matrix log_posterior;

  double a_at(int i) const;
  double b_at(int j) const;
  // CSV rows (a, b, value) for one field
  std::string field_csv(const Matrix& field) const;
  std::string metadata_json() const;
};

// Evaluates all three fields on an R x R lattice; the log-posterior field is
// (1/T)(log lik + log prior), matching log_density. Lattice points are
// processed in parallel by `workers` threads with deterministic assembly.
SubspaceGrid scan_grid(const SubspaceBasis& basis, const ScanRanges& ranges,
                       int resolution, const PosteriorSpec& post,
                       int workers = 1);

}  // namespace bnn
