#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace adscreen::linear {

struct EmbeddingProvenance {
  std::string model_name;
  std::string pooling;
  std::string layer;
};

struct EmbeddingMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;  // N x H
  std::optional<EmbeddingProvenance> provenance;

  std::size_t rows() const { return ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

// CSV with header `id,e0,...,e{H-1}`. Parses the text only; see load_embeddings
// for the file + sidecar variant.
EmbeddingMatrix parse_embeddings_csv(std::string_view csv);

// Reads `path` and, when present, the sidecar `<path minus .csv>.json`
// ({model_name, pooling, layer, H}); a sidecar H that disagrees with the CSV
// is a DimensionMismatch.
EmbeddingMatrix load_embeddings(const std::string& path);

// Reorders rows to follow `dataset_ids`. Ids in the file but not the dataset
// raise UnknownId; dataset ids missing from the file raise UnknownId as well.
EmbeddingMatrix align_embeddings(const EmbeddingMatrix& matrix,
                                 std::span<const std::string> dataset_ids);

enum class HeadKind { Logistic, Lasso };

struct LinearModel {
  HeadKind kind = HeadKind::Logistic;
  Eigen::VectorXd weights;  // in standardised feature space
  double bias = 0.0;
  double regularization = 0.0;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;

  // Weights mapped back to the raw feature space.
  Eigen::VectorXd raw_weights() const;
  double raw_bias() const;
};

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population std, 1 where a column is constant

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

// Minimises mean logistic loss + l2_lambda |w|^2 (bias unpenalised) with
// Newton-CG until the gradient norm falls below 1e-6. y holds 0/1.
LinearModel train_logistic(const Eigen::MatrixXd& X, std::span<const double> y, double l2_lambda,
                           std::uint64_t seed = 0);

// Coordinate descent on 0.5 * mean squared error + l1_alpha |w|_1 with soft
// thresholding; stops once the largest coordinate change is below 1e-8.
LinearModel train_lasso(const Eigen::MatrixXd& X, std::span<const double> y, double l1_alpha,
                        std::uint64_t seed = 0, int max_epochs = 100000);

// Probabilities for logistic heads, raw values for LASSO.
Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X);

// Mean logistic loss + l2 penalty and its gradient over (w, b), evaluated on
// already-standardised features. Exposed for gradient checks.
double logistic_objective(const Eigen::MatrixXd& Z, std::span<const double> y, double l2_lambda,
                          const Eigen::VectorXd& w, double b, Eigen::VectorXd* grad_w = nullptr,
                          double* grad_b = nullptr);

inline const std::vector<double>& default_regularization_grid() {
  static const std::vector<double> grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
  return grid;
}

nlohmann::ordered_json to_json(const LinearModel& model);
LinearModel linear_from_json(const nlohmann::ordered_json& j);

}  // namespace adscreen::linear
