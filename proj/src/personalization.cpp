#include "accudrive/personalization.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "accudrive/errors.hpp"
#include "accudrive/init.hpp"
#include "accudrive/kernels.hpp"

namespace accudrive::personalization {

std::optional<std::size_t> index_of(std::span<const std::string> drivers, std::string_view driver) {
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    if (drivers[i] == driver) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> EmbeddingTable::index_of(std::string_view driver) const {
  return personalization::index_of(drivers, driver);
}

PersonalizationParams init_params(std::size_t features, std::size_t width, std::size_t drivers,
                                  std::mt19937_64& rng) {
  if (drivers == 0) throw ConfigError("embedding table needs at least one driver");
  PersonalizationParams params;
  std::normal_distribution<double> normal(0.0, 0.1);
  params.embedding = Tensor(drivers, width);
  for (double& v : params.embedding.values()) v = normal(rng);
  params.weight = uniform_fan_in(features, features + width, features + width, rng);
  params.bias = uniform_fan_in(1, features, features + width, rng);
  return params;
}

std::vector<double> mean_row(const Tensor& rows) {
  if (rows.rows() == 0) throw ConfigError("embedding table is empty");
  std::vector<double> mean(rows.cols(), 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) mean[c] += rows(r, c);
  }
  const double n = static_cast<double>(rows.rows());
  for (double& v : mean) v /= n;
  return mean;
}

std::vector<double> lookup(const EmbeddingTable& table, std::string_view driver) {
  if (table.rows.rows() == 0) throw ConfigError("embedding table is empty");
  if (auto idx = table.index_of(driver)) {
    auto row = table.rows.row(*idx);
    return {row.begin(), row.end()};
  }
  return mean_row(table.rows);
}

std::vector<double> personalize(const PersonalizationParams& params,
                                std::span<const double> features, std::span<const double> e) {
  if (features.size() + e.size() != params.weight.cols()) {
    throw DimensionError("personalize: weight " + params.weight.shape() + " cannot take " +
                         std::to_string(features.size()) + " features and an embedding of " +
                         std::to_string(e.size()));
  }
  std::vector<double> joined(features.begin(), features.end());
  joined.insert(joined.end(), e.begin(), e.end());
  std::vector<double> out(params.weight.rows());
  kernels::affine_row(params.weight.values(), params.bias.values(), joined, out);
  return out;
}

diff::Var lookup(diff::Var embedding, std::span<const std::string> drivers,
                 std::string_view driver) {
  const Tensor& rows = embedding.value();
  if (rows.rows() == 0) throw ConfigError("embedding table is empty");
  if (auto idx = index_of(drivers, driver)) return diff::select_row(embedding, *idx);
  return embedding.graph()->constant(Tensor::row_vector(mean_row(rows)));
}

diff::Var personalize(const PersonalizationParamsT<diff::Var>& params, diff::Var features,
                      diff::Var e) {
  const std::size_t steps = features.value().rows();
  return diff::affine(params.weight, params.bias,
                      diff::concat_cols(features, diff::repeat_rows(e, steps)));
}

Tensor pca_project(const EmbeddingTable& table, std::size_t dims) {
  const std::size_t d = table.rows.rows();
  const std::size_t e = table.rows.cols();
  if (d < 2) throw ArgumentError("pca_project needs at least two drivers");
  if (dims == 0 || dims > std::min(d, e)) {
    throw ArgumentError("pca_project: dims must be in [1, " + std::to_string(std::min(d, e)) +
                        "], got " + std::to_string(dims));
  }
  const std::vector<double> mean = mean_row(table.rows);
  Eigen::MatrixXd centred(d, e);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < e; ++c) centred(r, c) = table.rows(r, c) - mean[c];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  Eigen::MatrixXd basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(dims));
  for (Eigen::Index k = 0; k < basis.cols(); ++k) {
    Eigen::Index arg = 0;
    basis.col(k).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, k) < 0.0) basis.col(k) *= -1.0;
  }
  const Eigen::MatrixXd projected = centred * basis;
  Tensor out(d, dims);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t k = 0; k < dims; ++k) {
      out(r, k) = projected(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

}  // namespace accudrive::personalization
