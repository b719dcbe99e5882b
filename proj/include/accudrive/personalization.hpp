#pragma once

// Driver embeddings concatenated with the perceptual features and folded back
// to the feature width by one linear layer.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accudrive/diff.hpp"
#include "accudrive/tensor.hpp"

namespace accudrive::personalization {

template <class T>
struct PersonalizationParamsT {
  T embedding;  // [D x E], one row per training driver
  T weight;     // [kC x (kC + E)]
  T bias;       // [1 x kC]
};

using PersonalizationParams = PersonalizationParamsT<Tensor>;

struct EmbeddingTable {
  std::vector<std::string> drivers;  // row i belongs to drivers[i]
  Tensor rows;

  std::optional<std::size_t> index_of(std::string_view driver) const;
};

std::optional<std::size_t> index_of(std::span<const std::string> drivers, std::string_view driver);

// Embedding rows ~ N(0, 0.1^2); the compression layer uses fan-in uniform init.
PersonalizationParams init_params(std::size_t features, std::size_t width, std::size_t drivers,
                                  std::mt19937_64& rng);

// Column-wise arithmetic mean of the rows.
std::vector<double> mean_row(const Tensor& rows);

// The driver's row, or the mean row for a driver outside the vocabulary.
std::vector<double> lookup(const EmbeddingTable& table, std::string_view driver);

std::vector<double> personalize(const PersonalizationParams& params,
                                std::span<const double> features, std::span<const double> e);

// Graph lookup. Unknown drivers get the mean row as a constant, so the
// fallback never feeds gradient back into the table.
diff::Var lookup(diff::Var embedding, std::span<const std::string> drivers,
                 std::string_view driver);

// features is [T x kC]; e is [1 x E] and is shared by every row.
diff::Var personalize(const PersonalizationParamsT<diff::Var>& params, diff::Var features,
                      diff::Var e);

// Rows centred by the column means and projected on the top `dims` right
// singular vectors. Each component's sign is chosen so that its
// largest-magnitude loading is positive.
Tensor pca_project(const EmbeddingTable& table, std::size_t dims);

}  // namespace accudrive::personalization
