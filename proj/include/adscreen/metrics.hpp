#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adscreen::eval {

// AD is the positive class.
struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
  static ConfusionMatrix from_predictions(std::span<const int> predicted, std::span<const int> gold);
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationMetrics {
  ClassScores ad;
  ClassScores non_ad;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  // Set when some ratio was 0/0 and reported as 0.
  bool undefined_ratio = false;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

double rmse(std::span<const double> predictions, std::span<const double> golds);

// Per-fold values plus their means. Classification fields are empty for
// regression runs and vice versa.
struct FoldMetrics {
  std::optional<ClassificationMetrics> classification;
  std::optional<double> rmse;
  std::size_t n_valid = 0;
};

struct MetricsReport {
  std::vector<FoldMetrics> folds;
  std::optional<ClassificationMetrics> mean_classification;
  std::optional<double> mean_rmse;
};

MetricsReport summarize(std::vector<FoldMetrics> folds);

}  // namespace adscreen::eval
