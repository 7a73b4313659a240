#include "bnn/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bnn/rng.hpp"

namespace bnn {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

double TeacherFunction::operator()(double x) const {
  Matrix input(1, 2);
  input << x, x * x;
  return forward(spec, params, input)(0, 0);
}

SyntheticRegression gen_synthetic_regression(
    const SyntheticRegressionConfig& cfg) {
  if (cfg.points_per_interval < 1)
    throw std::invalid_argument("points_per_interval must be >= 1");
  if (cfg.noise_std < 0) throw std::invalid_argument("noise_std must be >= 0");
  for (const auto& [lo, hi] : cfg.intervals)
    if (!(lo < hi)) throw std::invalid_argument("interval lo must be < hi");

  SyntheticRegression out;
  out.teacher.spec.input_dim = 2;
  out.teacher.spec.hidden_widths = cfg.teacher_hidden;
  out.teacher.spec.activation = Activation::Swish;
  out.teacher.spec.head = HeadKind::RegressionFixedStd;
  out.teacher.spec.fixed_noise_std = cfg.noise_std > 0 ? cfg.noise_std : 1.0;

  Rng rng(cfg.seed, 0xda7a);
  const Eigen::Index dim = param_count(out.teacher.spec);
  out.teacher.params.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    out.teacher.params[i] = cfg.teacher_weight_std * rng.normal();

  const Eigen::Index n =
      static_cast<Eigen::Index>(cfg.intervals.size()) * cfg.points_per_interval;
  out.train.inputs.resize(n, 2);
  out.train.targets.resize(n);
  out.train.name = "synthetic";
  Eigen::Index row = 0;
  for (const auto& [lo, hi] : cfg.intervals) {
    for (int k = 0; k < cfg.points_per_interval; ++k, ++row) {
      const double x =
          cfg.points_per_interval == 1
              ? lo
              : lo + (hi - lo) * k / (cfg.points_per_interval - 1);
      out.train.inputs(row, 0) = x;
      out.train.inputs(row, 1) = x * x;
    }
  }
  const Vector clean =
      forward(out.teacher.spec, out.teacher.params, out.train.inputs).col(0);
  for (Eigen::Index i = 0; i < n; ++i)
    out.train.targets[i] = clean[i] + cfg.noise_std * rng.normal();
  return out;
}

Dataset load_regression_table(const std::filesystem::path& path,
                              char delimiter) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open data file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // normalize the delimiter, then parse as whitespace-separated numbers
    std::string normalized = line;
    if (delimiter != 0)
      std::replace(normalized.begin(), normalized.end(), delimiter, ' ');
    else
      std::replace(normalized.begin(), normalized.end(), ',', ' ');
    if (normalized.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(normalized);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" +
                                 std::to_string(line_no) +
                                 ": non-numeric cell '" + token + "'");
      }
    }
    if (row.size() < 2)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": need at least one feature and a target");
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(width) +
                               " columns, found " +
                               std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw std::runtime_error("empty data file: " + path.string());

  Dataset data;
  data.name = path.stem().string();
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(width) - 1;
  data.inputs.resize(n, d);
  data.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j)
      data.inputs(i, j) = rows[static_cast<std::size_t>(i)]
                              [static_cast<std::size_t>(j)];
    data.targets[i] = rows[static_cast<std::size_t>(i)].back();
  }
  return data;
}

Dataset Standardizer::standardize(const Dataset& data) const {
  Dataset out = data;
  out.inputs = (data.inputs.rowwise() - input_mean).array().rowwise() /
               input_std.array();
  if (!data.is_classification())
    out.targets = (data.targets.array() - target_mean) / target_std;
  return out;
}

double Standardizer::destandardize_target(double standardized) const {
  return standardized * target_std + target_mean;
}

double Standardizer::destandardize_scale(double standardized_std) const {
  return standardized_std * target_std;
}

RegressionSplit split_standardize(const Dataset& full, const SplitSpec& split) {
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  const Eigen::Index n = full.size();
  const Eigen::Index n_train =
      static_cast<Eigen::Index>(std::llround(split.train_fraction * n));
  if (n_train < 2 || n_train >= n)
    throw std::invalid_argument("split leaves too few rows on one side");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(split.seed, 0x5b17 + static_cast<std::uint64_t>(split.index));
  std::shuffle(order.begin(), order.end(), rng.engine());

  auto take = [&](Eigen::Index begin, Eigen::Index end) {
    Dataset part;
    part.name = full.name;
    part.inputs.resize(end - begin, full.inputs.cols());
    part.targets.resize(end - begin);
    for (Eigen::Index i = begin; i < end; ++i) {
      part.inputs.row(i - begin) =
          full.inputs.row(order[static_cast<std::size_t>(i)]);
      part.targets[i - begin] = full.targets[order[static_cast<std::size_t>(i)]];
    }
    return part;
  };

  RegressionSplit out;
  out.train_raw = take(0, n_train);
  out.test_raw = take(n_train, n);

  Standardizer& st = out.standardizer;
  st.input_mean = out.train_raw.inputs.colwise().mean();
  st.input_std =
      ((out.train_raw.inputs.rowwise() - st.input_mean).array().square()
           .colwise()
           .sum() /
       (n_train - 1))
          .sqrt();
  for (Eigen::Index j = 0; j < st.input_std.size(); ++j)
    if (st.input_std[j] == 0.0) st.input_std[j] = 1.0;  // constant feature
  st.target_mean = out.train_raw.targets.mean();
  st.target_std = std::sqrt(
      (out.train_raw.targets.array() - st.target_mean).square().sum() /
      (n_train - 1));
  if (st.target_std == 0.0) st.target_std = 1.0;

  out.train = st.standardize(out.train_raw);
  out.test = st.standardize(out.test_raw);
  return out;
}

RegressionSplit load_uci(const std::filesystem::path& path,
                         const SplitSpec& split, char delimiter) {
  return split_standardize(load_regression_table(path, delimiter), split);
}

Dataset corrupt_gaussian(const Dataset& data, double sigma,
                         std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("sigma must be >= 0");
  Dataset out = data;
  if (sigma == 0.0) return out;
  Rng rng(seed, 0xc0bb);
  for (Eigen::Index i = 0; i < out.inputs.rows(); ++i)
    for (Eigen::Index j = 0; j < out.inputs.cols(); ++j)
      out.inputs(i, j) += sigma * rng.normal();
  return out;
}

Dataset load_classification(const std::filesystem::path& path,
                            int* num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open data file: " + path.string());
  std::uint64_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw std::runtime_error("truncated header: " + path.string());
  const auto [n, d, c] = std::tuple(header[0], header[1], header[2]);
  if (n == 0 || d == 0 || c < 2)
    throw std::runtime_error("invalid container header: " + path.string());

  Dataset data;
  data.name = path.stem().string();
  data.inputs.resize(static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(d));
  // Eigen is column-major; read row by row
  std::vector<double> row(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(d * sizeof(double)));
    if (!in)
      throw std::runtime_error("truncated feature block: " + path.string());
    for (std::uint64_t j = 0; j < d; ++j)
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          row[j];
  }
  std::vector<std::uint16_t> labels(n);
  in.read(reinterpret_cast<char*>(labels.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint16_t)));
  if (!in) throw std::runtime_error("truncated label block: " + path.string());
  data.labels.reserve(n);
  for (std::uint16_t y : labels) {
    if (y >= c)
      throw std::runtime_error("label out of range in " + path.string());
    data.labels.push_back(static_cast<int>(y));
  }
  if (num_classes) *num_classes = static_cast<int>(c);
  return data;
}

void save_classification(const std::filesystem::path& path, const Dataset& data,
                         int num_classes) {
  if (!data.is_classification())
    throw std::invalid_argument("dataset has no labels");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  for (int y : data.labels)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("label out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write data file: " + path.string());
  const std::uint64_t header[3] = {
      static_cast<std::uint64_t>(data.size()),
      static_cast<std::uint64_t>(data.inputs.cols()),
      static_cast<std::uint64_t>(num_classes)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<double> row(static_cast<std::size_t>(data.inputs.cols()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j)
      row[static_cast<std::size_t>(j)] = data.inputs(i, j);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  std::vector<std::uint16_t> labels;
  labels.reserve(data.labels.size());
  for (int y : data.labels) labels.push_back(static_cast<std::uint16_t>(y));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size() * sizeof(std::uint16_t)));
  if (!out)
    throw std::runtime_error("write failed: " + path.string());
}

}  // namespace bnn
