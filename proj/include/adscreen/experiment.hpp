#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adscreen/dataset.hpp"
#include "adscreen/folds.hpp"
#include "adscreen/metrics.hpp"
#include "adscreen/pipeline.hpp"
#include "adscreen/search.hpp"

namespace adscreen::experiment {

inline constexpr const char* kVersion = "0.1.0";

enum class GridPreset { Published, None };

struct ExperimentConfig {
  std::string transcripts;  // .cha directory, transcripts JSONL or dataset JSONL
  std::optional<std::string> embeddings;
  bool lenient = false;
  std::string id_layout;  // overrides such as "mmse=9"
  data::Variant variant = data::Variant::PAR;
  pipeline::ModelSpec model;
  GridPreset grid = GridPreset::Published;
  std::optional<std::vector<eval::Axis>> grid_axes;                // replaces the preset axes
  std::optional<std::vector<eval::ExponentialAxis>> grid_sampled;  // replaces the preset draws
  std::size_t grid_draws = 15;
  int select_k = 5;
  int report_k = 10;
  eval::FoldStrategy strategy = eval::FoldStrategy::Stratified;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = one per core
  std::string output_dir;

  void validate() const;
};

// Every key the configuration file accepts, with a one-line description.
const std::vector<std::pair<std::string, std::string>>& config_keys();

// Keys absent from `j` keep their defaults. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const ExperimentConfig& config);

// Loads transcripts from a directory of .cha files (unparseable files are
// skipped with a warning), a transcripts JSONL file or a dataset JSONL file,
// and builds `variant`. A dataset file must already hold that variant.
data::Dataset load_dataset(const std::string& path, data::Variant variant, bool lenient,
                           const std::string& id_layout, std::vector<std::string>* warnings);

// Parses every .cha file under `dir` in name order.
std::vector<chat::Transcript> parse_directory(const std::string& dir, const chat::ParseOptions& options,
                                              std::vector<std::string>* warnings);

// Hyper-parameter space searched for the configuration; empty when the
// configuration asks for no search.
std::optional<eval::GridSpec> search_space(const ExperimentConfig& config);

struct Selection {
  std::optional<eval::SearchResult> search;  // absent when nothing is searched
  eval::ParamSet params;                     // defaults, fixed params and the winning config
  std::size_t n_units = 0;
  std::vector<std::string> warnings;
};

// Runs only the select_k-fold hyper-parameter search.
Selection select_params(const ExperimentConfig& config);

struct TrainResult {
  pipeline::FittedPipeline model;
  Selection selection;
  std::string embedding_model;
};

// Selects parameters (when a search space is configured) and fits the model
// on every usable transcript.
TrainResult train_final(const ExperimentConfig& config);

struct ExperimentResult {
  std::optional<eval::SearchResult> search;
  eval::ParamSet params;  // parameters used for reporting
  eval::MetricsReport report;
  std::size_t n_units = 0;
  std::vector<std::string> warnings;
  nlohmann::ordered_json metrics;   // contents of metrics.json
  nlohmann::ordered_json manifest;  // contents of manifest.json
};

// Parse, build, select hyper-parameters with select_k-fold CV over the whole
// dataset, then report report_k-fold CV with the chosen parameters. Writes
// metrics.json, folds.csv, summary.txt, manifest.json and (when searching)
// search.json into output_dir when it is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string fnv1a_hex(std::string_view bytes);

nlohmann::ordered_json to_json(const eval::ClassificationMetrics& m);
nlohmann::ordered_json metrics_json(const ExperimentConfig& config, const eval::ParamSet& params,
                                    const eval::MetricsReport& report);
std::string folds_csv(const eval::MetricsReport& report);
// One header line and one row in the column layout of the published results table.
std::string summary_text(const nlohmann::ordered_json& metrics);

// Published 10-fold CV results per dataset variant and model.
struct ReferenceRow {
  std::string dataset;
  std::string model;
  double accuracy;
  double precision;
  double recall;
  double f1;
  std::optional<double> rmse;
};

const std::vector<ReferenceRow>& table2();

// Dataset and model labels used by the published table for a metrics file.
std::string dataset_label(data::Variant variant);
std::string model_label(pipeline::ModelKind kind, const std::string& embedding_model);

// Side-by-side comparison of metrics.json documents against the published
// table; informational, rows within 0.05 are marked.
std::string compare_table2(const std::vector<nlohmann::ordered_json>& metrics);

}  // namespace adscreen::experiment
