#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bnn/model.hpp"

namespace bnn {

// Ordered posterior samples from one chain. On rejection the current state is
// stored again, so there is always one row per sampling iteration.
//
// Binary layout ("BNNS" container): magic "BNNS", u32 format version,
// u64 parameter count, u64 sample count, then row-major little-endian f64.
// A JSON sidecar at <path>.json carries the config snapshot, seed and
// acceptance metadata.
struct SampleStore {
  std::string chain_id;
  Matrix samples;  // one row per stored sample
  std::vector<double> accept_probs;
  std::vector<bool> accepted;
  nlohmann::json config;  // producer config snapshot

  Eigen::Index num_samples() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
  double accept_rate() const;

  ParameterVector sample(Eigen::Index i) const {
    return samples.row(i).transpose();
  }
};

inline constexpr std::uint32_t kStoreFormatVersion = 1;

void save_store(const SampleStore& store, const std::string& path);
SampleStore load_store(const std::string& path);

}  // namespace bnn
