#include "bnn/sample_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bnn {

static_assert(std::endian::native == std::endian::little,
              "BNNS container is little-endian");

double SampleStore::accept_rate() const {
  if (accepted.empty()) return 0.0;
  std::size_t n = 0;
  for (bool a : accepted) n += a ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(accepted.size());
}

void save_store(const SampleStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write("BNNS", 4);
  const std::uint32_t version = kStoreFormatVersion;
  const std::uint64_t dim = static_cast<std::uint64_t>(store.dim());
  const std::uint64_t count = static_cast<std::uint64_t>(store.num_samples());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  // row-major rows
  std::vector<double> row(static_cast<std::size_t>(store.dim()));
  for (Eigen::Index i = 0; i < store.num_samples(); ++i) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), store.dim()) = store.samples.row(i);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
  out.close();

  nlohmann::json sidecar;
  sidecar["chain_id"] = store.chain_id;
  sidecar["config"] = store.config;
  sidecar["accept_probs"] = store.accept_probs;
  std::vector<int> acc;
  acc.reserve(store.accepted.size());
  for (bool a : store.accepted) acc.push_back(a ? 1 : 0);
  sidecar["accepted"] = acc;
  sidecar["accept_rate"] = store.accept_rate();
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write sidecar for " + path);
  side << sidecar.dump(2) << "\n";
}

SampleStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BNNS", 4) != 0)
    throw std::runtime_error(path + " is not a BNNS store");
  std::uint32_t version = 0;
  std::uint64_t dim = 0, count = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in) throw std::runtime_error(path + ": truncated header");
  if (version != kStoreFormatVersion)
    throw std::runtime_error(path + ": unsupported format version " +
                             std::to_string(version));

  SampleStore store;
  store.samples.resize(static_cast<Eigen::Index>(count),
                       static_cast<Eigen::Index>(dim));
  std::vector<double> row(static_cast<std::size_t>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated sample data");
    store.samples.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(dim));
  }

  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json sidecar = nlohmann::json::parse(side);
    store.chain_id = sidecar.value("chain_id", "");
    if (sidecar.contains("config")) store.config = sidecar["config"];
    if (sidecar.contains("accept_probs"))
      store.accept_probs = sidecar["accept_probs"].get<std::vector<double>>();
    if (sidecar.contains("accepted"))
      for (int a : sidecar["accepted"].get<std::vector<int>>())
        store.accepted.push_back(a != 0);
  }
  return store;
}

}  // namespace bnn
