#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adscreen/error.hpp"

namespace adscreen::eval {

using ParamValue = std::variant<bool, std::int64_t, double, std::string>;
// Ordered name/value pairs; order follows the grid axes.
using ParamSet = std::vector<std::pair<std::string, ParamValue>>;

struct Axis {
  std::string name;
  std::vector<ParamValue> values;
};

// Values drawn as -scale * ln(1 - u).
struct ExponentialAxis {
  std::string name;
  double scale = 1.0;
};

struct GridSpec {
  std::vector<Axis> axes;
  std::vector<ExponentialAxis> sampled;
  std::size_t draws = 15;  // joint draws over all sampled axes
  std::uint64_t seed = 0;

  // Number of configurations enumerate_configs() will produce.
  std::size_t size() const;
};

// Cartesian product of the finite axes (last axis varies fastest), each
// combined with every joint draw of the sampled axes.
std::vector<ParamSet> enumerate_configs(const GridSpec& grid);

std::vector<double> sample_exponential(double scale, std::size_t n, std::uint64_t seed);

// Hyper-parameter spaces of the published baselines.
GridSpec svm_grid();
GridSpec gbdt_grid();
GridSpec crf_random_search(std::uint64_t seed, std::size_t draws = 15);

std::string to_string(const ParamValue& value);
nlohmann::ordered_json to_json(const ParamValue& value);
ParamValue param_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const ParamSet& params);
ParamSet params_from_json(const nlohmann::ordered_json& j);

// Later entries win.
ParamSet merge(const ParamSet& base, const ParamSet& overrides);

const ParamValue* find(const ParamSet& params, const std::string& name);
double get_double(const ParamSet& params, const std::string& name, double fallback);
std::int64_t get_int(const ParamSet& params, const std::string& name, std::int64_t fallback);
bool get_bool(const ParamSet& params, const std::string& name, bool fallback);
std::string get_string(const ParamSet& params, const std::string& name, const std::string& fallback);

struct ConfigResult {
  ParamSet params;
  std::optional<double> score;
  std::optional<ErrorKind> error_kind;
  std::string error;
};

struct SearchResult {
  std::vector<ConfigResult> results;  // in configuration order
  std::size_t best = 0;
};

// Scores every configuration (higher is better) on a pool of worker threads;
// results land in configuration order so the outcome does not depend on
// scheduling. Failed configurations are recorded and skipped. The best is the
// first configuration with the maximal score. Throws when every one failed.
SearchResult grid_search(const std::vector<ParamSet>& configs,
                         const std::function<double(const ParamSet&)>& evaluate,
                         unsigned threads = 0);

nlohmann::ordered_json to_json(const SearchResult& result);

}  // namespace adscreen::eval
