#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adscreen/crf.hpp"
#include "adscreen/dataset.hpp"
#include "adscreen/folds.hpp"
#include "adscreen/gbdt.hpp"
#include "adscreen/linear_heads.hpp"
#include "adscreen/metrics.hpp"
#include "adscreen/search.hpp"
#include "adscreen/svm.hpp"
#include "adscreen/tfidf.hpp"

namespace adscreen::pipeline {

enum class ModelKind { Svm, Gbdt, SvmCrf, GbdtCrf, EmbedLogistic, EmbedLasso };
enum class Task { Classify, Regress };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Task task);
ModelKind parse_model_kind(std::string_view name);
Task parse_task(std::string_view name);

bool uses_crf(ModelKind kind);
bool uses_embeddings(ModelKind kind);

// Throws UnsupportedCombination for pairings the pipeline cannot run, e.g. a
// CRF model asked to regress or a text model on the wrong granularity.
void check_combination(ModelKind kind, Task task, data::Variant variant);

struct ModelSpec {
  ModelKind kind = ModelKind::Svm;
  Task task = Task::Classify;
  eval::ParamSet params;
};

// Parameters used when neither the grid nor the configuration sets them.
eval::ParamSet default_params(ModelKind kind);

// The dataset viewed as transcripts ("units"). Utterance-level variants keep
// their segments grouped under each unit, in utterance order.
struct Corpus {
  data::Variant variant = data::Variant::PAR;
  std::vector<std::string> ids;
  std::vector<int> labels;  // 1 = AD
  std::vector<std::optional<double>> mmse;
  std::vector<std::string> texts;  // transcript-level variants
  std::vector<std::optional<data::TimeAggregates>> aggregates;
  std::vector<std::vector<data::SegmentRecord>> segments;  // utterance-level variants
  std::optional<linear::EmbeddingMatrix> embeddings;       // rows follow ids

  std::size_t size() const { return ids.size(); }
};

Corpus make_corpus(const data::Dataset& dataset,
                   std::optional<linear::EmbeddingMatrix> embeddings = std::nullopt);

// Units usable for the task: all of them for classification, those with an
// MMSE score for regression.
std::vector<std::size_t> usable_units(const Corpus& corpus, Task task);

// Column-wise z-scoring fitted on training rows.
struct ZScore {
  std::vector<double> mean;
  std::vector<double> scale;

  static ZScore fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(std::vector<double> row) const;
};

// Intermediate fits shared between configurations of one search: TF-IDF
// features keyed by text parameters and training units, and stacked base
// models keyed by base parameters and training units (CRF configurations that
// differ only in c1 / c2 reuse them).
class FitCache {
 public:
  template <typename T>
  std::shared_ptr<const T> get(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : std::static_pointer_cast<const T>(it->second);
  }
  template <typename T>
  std::shared_ptr<const T> put(const std::string& key, T value) {
    auto ptr = std::make_shared<const T>(std::move(value));
    std::lock_guard lock(mutex_);
    return std::static_pointer_cast<const T>(entries_.emplace(key, ptr).first->second);
  }

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const void>> entries_;
};

struct FittedPipeline {
  ModelSpec spec;
  data::Variant variant = data::Variant::PAR;
  std::optional<text::TfidfModel> tfidf;
  std::optional<svm::SvmModel> svm;
  std::optional<gbdt::GbdtModel> gbdt;
  std::optional<ZScore> extra_scaler;  // appended aggregates or CRF observation features
  std::optional<crf::CrfModel> crf;
  std::optional<linear::LinearModel> linear;
};

FittedPipeline fit_pipeline(const Corpus& corpus, std::span<const std::size_t> units,
                            const ModelSpec& spec, std::uint64_t seed,
                            FitCache* cache = nullptr);

struct Predictions {
  std::vector<int> labels;       // classification
  std::vector<double> scores;    // p(AD) for classification, MMSE for regression
};

// MMSE predictions are clamped to [0, 30].
Predictions predict_pipeline(const FittedPipeline& model, const Corpus& corpus,
                             std::span<const std::size_t> units);

nlohmann::ordered_json to_json(const FittedPipeline& model);
FittedPipeline pipeline_from_json(const nlohmann::ordered_json& j);

// Fits on each fold's training units and scores its validation units. Fold
// indices refer to positions in `units`.
std::vector<eval::FoldMetrics> cross_validate(const Corpus& corpus,
                                              std::span<const std::size_t> units,
                                              const std::vector<eval::Fold>& folds,
                                              const ModelSpec& spec, std::uint64_t seed,
                                              FitCache* cache = nullptr);

std::vector<eval::Fold> unit_folds(const Corpus& corpus, std::span<const std::size_t> units,
                                   const eval::FoldSpec& spec);

// Selection score: mean accuracy, or negated mean RMSE.
double selection_score(const eval::MetricsReport& report, Task task);

}  // namespace adscreen::pipeline
