#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adscreen/sparse.hpp"

namespace adscreen::gbdt {

enum class Loss { Logistic, Squared };

std::string_view to_string(Loss loss);

struct GbdtParams {
  int n_estimators = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 1;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  // feature < 0 marks a leaf.
  int feature = -1;
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;
  double gain = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const SparseRow& x) const;
  int depth() const;
};

struct GbdtModel {
  Loss loss = Loss::Squared;
  GbdtParams params;
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::size_t n_features = 0;
};

// Per-row statistics used to grow one tree: first and second derivatives of
// the loss at the current prediction.
struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best split of `rows` by Newton gain G_L^2/H_L + G_R^2/H_R - G^2/H over all
// features and midpoints between sorted distinct values. Implicit zeros of
// the sparse input take part. Ties keep the lowest feature, then the lowest
// threshold. Returns feature -1 when no split has positive gain.
SplitCandidate best_split(const SparseMatrix& X, std::span<const std::size_t> rows,
                          std::span<const double> grad, std::span<const double> hess,
                          int min_samples_leaf);

// Logistic loss expects y in {0, 1}.
GbdtModel train_gbdt(const SparseMatrix& X, std::span<const double> y, Loss loss,
                     const GbdtParams& params, std::vector<double>* stage_losses = nullptr);

// Raw margins; probabilities come from predict_gbdt.
std::vector<double> predict_margin(const GbdtModel& model, const SparseMatrix& X);
// Probabilities for logistic loss, raw values for squared loss.
std::vector<double> predict_gbdt(const GbdtModel& model, const SparseMatrix& X);

// Total split gain per feature, ordered by feature index.
std::map<int, double> feature_importance(const GbdtModel& model);

double mean_loss(Loss loss, std::span<const double> y, std::span<const double> margins);

nlohmann::ordered_json to_json(const GbdtModel& model);
GbdtModel gbdt_from_json(const nlohmann::ordered_json& j);

}  // namespace adscreen::gbdt
