#include "adscreen/metrics.hpp"

#include <cmath>

#include "adscreen/error.hpp"

namespace adscreen::eval {

namespace {

double ratio(long num, long den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassScores scores(long tp, long fp, long fn, bool& undefined) {
  ClassScores s;
  s.precision = ratio(tp, tp + fp, undefined);
  s.recall = ratio(tp, tp + fn, undefined);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  } else {
    undefined = true;
  }
  return s;
}

}  // namespace

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> predicted,
                                                  std::span<const int> gold) {
  if (predicted.size() != gold.size())
    throw Error(ErrorKind::DimensionMismatch, "prediction and gold label counts differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == 1;
    const bool g = gold[i] == 1;
    if (p && g) ++cm.tp;
    else if (p) ++cm.fp;
    else if (g) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.fn < 0 || cm.tn < 0)
    throw Error(ErrorKind::Invariant, "confusion matrix cells must be non-negative");
  ClassificationMetrics m;
  m.ad = scores(cm.tp, cm.fp, cm.fn, m.undefined_ratio);
  m.non_ad = scores(cm.tn, cm.fn, cm.fp, m.undefined_ratio);
  m.macro_precision = 0.5 * (m.ad.precision + m.non_ad.precision);
  m.macro_recall = 0.5 * (m.ad.recall + m.non_ad.recall);
  m.macro_f1 = 0.5 * (m.ad.f1 + m.non_ad.f1);
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), m.undefined_ratio);
  return m;
}

double rmse(std::span<const double> predictions, std::span<const double> golds) {
  if (predictions.size() != golds.size())
    throw Error(ErrorKind::DimensionMismatch, "prediction and gold value counts differ");
  if (golds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const double d = predictions[i] - golds[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(golds.size()));
}

MetricsReport summarize(std::vector<FoldMetrics> folds) {
  MetricsReport report;
  report.folds = std::move(folds);
  if (report.folds.empty()) return report;
  const double n = static_cast<double>(report.folds.size());
  if (report.folds.front().classification) {
    ClassificationMetrics mean;
    for (const auto& f : report.folds) {
      const auto& c = *f.classification;
      mean.ad.precision += c.ad.precision / n;
      mean.ad.recall += c.ad.recall / n;
      mean.ad.f1 += c.ad.f1 / n;
      mean.non_ad.precision += c.non_ad.precision / n;
      mean.non_ad.recall += c.non_ad.recall / n;
      mean.non_ad.f1 += c.non_ad.f1 / n;
      mean.macro_precision += c.macro_precision / n;
      mean.macro_recall += c.macro_recall / n;
      mean.macro_f1 += c.macro_f1 / n;
      mean.accuracy += c.accuracy / n;
      mean.undefined_ratio = mean.undefined_ratio || c.undefined_ratio;
    }
    report.mean_classification = mean;
  }
  if (report.folds.front().rmse) {
    double mean = 0.0;
    for (const auto& f : report.folds) mean += *f.rmse / n;
    report.mean_rmse = mean;
  }
  return report;
}

}  // namespace adscreen::eval
