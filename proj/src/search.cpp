#include "adscreen/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "adscreen/rng.hpp"

namespace adscreen::eval {

using Json = nlohmann::ordered_json;

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.values.size();
  return sampled.empty() ? n : n * draws;
}

std::vector<double> sample_exponential(double scale, std::size_t n, std::uint64_t seed) {
  if (!(scale > 0.0)) throw Error(ErrorKind::Config, "exponential scale must be positive");
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& x : out) x = -scale * std::log1p(-rng.uniform());
  return out;
}

std::vector<ParamSet> enumerate_configs(const GridSpec& grid) {
  for (const auto& axis : grid.axes) {
    if (axis.values.empty()) throw Error(ErrorKind::Config, "grid axis '" + axis.name + "' is empty");
  }
  // One joint draw per row; each sampled axis gets its own stream.
  std::vector<ParamSet> draws;
  if (!grid.sampled.empty()) {
    draws.assign(grid.draws, {});
    for (std::size_t a = 0; a < grid.sampled.size(); ++a) {
      const auto& axis = grid.sampled[a];
      const auto values = sample_exponential(axis.scale, grid.draws, grid.seed + 0x632be59bd9b4e019ULL * (a + 1));
      for (std::size_t d = 0; d < grid.draws; ++d) draws[d].emplace_back(axis.name, values[d]);
    }
  }

  std::vector<ParamSet> out;
  std::vector<std::size_t> pos(grid.axes.size(), 0);
  while (true) {
    ParamSet base;
    for (std::size_t a = 0; a < grid.axes.size(); ++a)
      base.emplace_back(grid.axes[a].name, grid.axes[a].values[pos[a]]);
    if (grid.sampled.empty()) {
      out.push_back(base);
    } else {
      for (const auto& d : draws) {
        ParamSet p = base;
        p.insert(p.end(), d.begin(), d.end());
        out.push_back(std::move(p));
      }
    }
    std::size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < grid.axes[a].values.size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
    if (grid.axes.empty()) return out;
  }
}

namespace {

std::vector<ParamValue> ints(std::initializer_list<std::int64_t> v) { return {v.begin(), v.end()}; }

const std::vector<ParamValue> kMaxFeatures = ints({100, 500, 1000, 2000, 10000});

}  // namespace

GridSpec svm_grid() {
  GridSpec g;
  g.axes = {{"max_features", kMaxFeatures},
            {"stop_words", {std::string("english"), std::string("none")}},
            {"analyzer", {std::string("word"), std::string("char")}},
            {"sublinear_tf", {true, false}},
            {"kernel", {std::string("rbf"), std::string("sigmoid")}},
            {"C", {0.1, 0.5, 1.0}}};
  return g;
}

GridSpec gbdt_grid() {
  GridSpec g;
  g.axes = {{"max_features", kMaxFeatures},
            {"stop_words", {std::string("english"), std::string("none")}},
            {"analyzer", {std::string("word"), std::string("char")}},
            {"sublinear_tf", {true, false}},
            {"n_estimators", ints({100, 200, 500})},
            {"max_depth", ints({3, 5, 10})}};
  return g;
}

GridSpec crf_random_search(std::uint64_t seed, std::size_t draws) {
  GridSpec g;
  g.sampled = {{"c1", 0.5}, {"c2", 0.05}};
  g.draws = draws;
  g.seed = seed;
  return g;
}

std::string to_string(const ParamValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream s;
          s.precision(6);
          s << v;
          return s.str();
        } else {
          return std::to_string(v);
        }
      },
      value);
}

Json to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return Json(v); }, value);
}

ParamValue param_from_json(const Json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorKind::Config, "parameter values must be booleans, numbers or strings");
}

Json to_json(const ParamSet& params) {
  Json j = Json::object();
  for (const auto& [name, value] : params) j[name] = to_json(value);
  return j;
}

ParamSet params_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "parameters must be a JSON object");
  ParamSet out;
  for (const auto& [name, value] : j.items()) out.emplace_back(name, param_from_json(value));
  return out;
}

ParamSet merge(const ParamSet& base, const ParamSet& overrides) {
  ParamSet out = base;
  for (const auto& [name, value] : overrides) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == name; });
    if (it == out.end())
      out.emplace_back(name, value);
    else
      it->second = value;
  }
  return out;
}

const ParamValue* find(const ParamSet& params, const std::string& name) {
  for (const auto& [n, v] : params)
    if (n == name) return &v;
  return nullptr;
}

namespace {

[[noreturn]] void wrong_type(const std::string& name, const char* want) {
  throw Error(ErrorKind::Config, "parameter '" + name + "' must be " + want);
}

}  // namespace

double get_double(const ParamSet& params, const std::string& name, double fallback) {
  const auto* v = find(params, name);
  if (!v) return fallback;
  if (const auto* d = std::get_if<double>(v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
  wrong_type(name, "a number");
}

std::int64_t get_int(const ParamSet& params, const std::string& name, std::int64_t fallback) {
  const auto* v = find(params, name);
  if (!v) return fallback;
  if (const auto* i = std::get_if<std::int64_t>(v)) return *i;
  if (const auto* d = std::get_if<double>(v); d && std::floor(*d) == *d) return static_cast<std::int64_t>(*d);
  wrong_type(name, "an integer");
}

bool get_bool(const ParamSet& params, const std::string& name, bool fallback) {
  const auto* v = find(params, name);
  if (!v) return fallback;
  if (const auto* b = std::get_if<bool>(v)) return *b;
  if (const auto* s = std::get_if<std::string>(v)) {
    if (*s == "true") return true;
    if (*s == "false") return false;
  }
  wrong_type(name, "true or false");
}

std::string get_string(const ParamSet& params, const std::string& name, const std::string& fallback) {
  const auto* v = find(params, name);
  if (!v) return fallback;
  if (const auto* s = std::get_if<std::string>(v)) return *s;
  wrong_type(name, "a string");
}

SearchResult grid_search(const std::vector<ParamSet>& configs,
                         const std::function<double(const ParamSet&)>& evaluate, unsigned threads) {
  if (configs.empty()) throw Error(ErrorKind::Config, "grid search needs at least one configuration");
  SearchResult out;
  out.results.resize(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) out.results[i].params = configs[i];

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      auto& r = out.results[i];
      try {
        const double s = evaluate(configs[i]);
        if (!std::isfinite(s)) throw Error(ErrorKind::NonFinite, "score is NaN or inf");
        r.score = s;
      } catch (const Error& e) {
        r.error_kind = e.kind();
        r.error = e.what();
      } catch (const std::exception& e) {
        r.error_kind = ErrorKind::Invariant;
        r.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, configs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < out.results.size(); ++i) {
    const auto& s = out.results[i].score;
    if (s && (!best || *s > *out.results[*best].score)) best = i;
  }
  if (!best) {
    const auto& first = out.results.front();
    throw Error(first.error_kind.value_or(ErrorKind::Invariant),
                "every configuration failed; first error: " + first.error);
  }
  out.best = *best;
  return out;
}

Json to_json(const SearchResult& result) {
  Json configs = Json::array();
  for (const auto& r : result.results) {
    Json c;
    c["params"] = to_json(r.params);
    c["score"] = r.score ? Json(*r.score) : Json(nullptr);
    if (r.error_kind) c["error"] = std::string(adscreen::to_string(*r.error_kind)) + ": " + r.error;
    configs.push_back(std::move(c));
  }
  Json j;
  j["n_configs"] = result.results.size();
  j["best_index"] = result.best;
  j["best_params"] = to_json(result.results[result.best].params);
  j["best_score"] = *result.results[result.best].score;
  j["configs"] = std::move(configs);
  return j;
}

}  // namespace adscreen::eval
