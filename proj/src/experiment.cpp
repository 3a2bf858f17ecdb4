#include "adscreen/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "adscreen/error.hpp"
#include "adscreen/io.hpp"
#include "adscreen/linear_heads.hpp"
#include "adscreen/rng.hpp"

namespace adscreen::experiment {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"data.transcripts", "directory of .cha files, transcripts JSONL or dataset JSONL"},
      {"data.embeddings", "embedding CSV (id,e0..); provenance read from the sibling .json"},
      {"data.lenient", "accept files without an @Begin/@End envelope (true/false)"},
      {"data.id_layout", "@ID field positions, e.g. \"age=3,sex=4,group=5,mmse=8\""},
      {"variant", "PAR, PAR_INV, PAR_TIME, PAR_SPLT, PAR_SPLT_T or PAR_SPLT_T_D"},
      {"model.kind", "svm, gbdt, svm_crf, gbdt_crf, embed_logistic or embed_lasso"},
      {"model.task", "classify or regress"},
      {"model.params", "object of fixed hyper-parameters (max_features, C, c1, lambda, ...)"},
      {"grid.preset", "published (search spaces from the reference study) or none"},
      {"grid.axes", "object mapping a parameter to the list of values to try"},
      {"grid.sampled", "object mapping a parameter to an exponential scale"},
      {"grid.draws", "number of joint exponential draws (default 15)"},
      {"folds.select_k", "folds used for hyper-parameter selection (default 5)"},
      {"folds.report_k", "folds used for the reported metrics (default 10)"},
      {"folds.strategy", "stratified or grouped"},
      {"seed", "master seed; ADSCREEN_SEED is used when neither flag nor file sets it"},
      {"threads", "worker threads for the search (0 = one per core)"},
      {"output.dir", "directory for metrics.json, folds.csv, summary.txt, manifest.json"},
  };
  return keys;
}

void ExperimentConfig::validate() const {
  pipeline::check_combination(model.kind, model.task, variant);
  if (transcripts.empty()) throw Error(ErrorKind::Config, "data.transcripts is required");
  if (pipeline::uses_embeddings(model.kind) && !embeddings)
    throw Error(ErrorKind::Config, std::string(pipeline::to_string(model.kind)) + " needs data.embeddings");
  if (report_k < 2) throw Error(ErrorKind::Config, "folds.report_k must be >= 2");
  if (search_space(*this) && select_k < 2) throw Error(ErrorKind::Config, "folds.select_k must be >= 2");
  if (grid_draws == 0 && grid_sampled && !grid_sampled->empty())
    throw Error(ErrorKind::Config, "grid.draws must be positive");
}

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw Error(ErrorKind::Config, "unknown configuration key '" + where + key + "'");
  }
}

template <typename T>
T read(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Config, "configuration key '" + where + key + "' has the wrong type");
  }
}

Json params_object(const eval::ParamSet& p) { return eval::to_json(p); }

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  reject_unknown(j, {"data", "variant", "model", "grid", "folds", "seed", "threads", "output"}, "");
  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown(d, {"transcripts", "embeddings", "lenient", "id_layout"}, "data.");
    if (d.contains("transcripts")) c.transcripts = read<std::string>(d, "transcripts", "data.");
    if (d.contains("embeddings") && !d["embeddings"].is_null())
      c.embeddings = read<std::string>(d, "embeddings", "data.");
    if (d.contains("lenient")) c.lenient = read<bool>(d, "lenient", "data.");
    if (d.contains("id_layout")) c.id_layout = read<std::string>(d, "id_layout", "data.");
  }
  if (j.contains("variant")) c.variant = data::parse_variant(read<std::string>(j, "variant", ""));
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, {"kind", "task", "params"}, "model.");
    if (m.contains("kind")) c.model.kind = pipeline::parse_model_kind(read<std::string>(m, "kind", "model."));
    if (m.contains("task")) c.model.task = pipeline::parse_task(read<std::string>(m, "task", "model."));
    if (m.contains("params")) c.model.params = eval::params_from_json(m["params"]);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    reject_unknown(g, {"preset", "axes", "sampled", "draws"}, "grid.");
    if (g.contains("preset")) {
      const auto p = read<std::string>(g, "preset", "grid.");
      if (p == "published")
        c.grid = GridPreset::Published;
      else if (p == "none")
        c.grid = GridPreset::None;
      else
        throw Error(ErrorKind::Config, "grid.preset must be published or none, got '" + p + "'");
    }
    if (g.contains("axes")) {
      std::vector<eval::Axis> axes;
      if (!g["axes"].is_object()) throw Error(ErrorKind::Config, "grid.axes must be an object");
      for (const auto& [name, values] : g["axes"].items()) {
        if (!values.is_array()) throw Error(ErrorKind::Config, "grid.axes." + name + " must be a list");
        eval::Axis axis{name, {}};
        for (const auto& v : values) axis.values.push_back(eval::param_from_json(v));
        axes.push_back(std::move(axis));
      }
      c.grid_axes = std::move(axes);
    }
    if (g.contains("sampled")) {
      std::vector<eval::ExponentialAxis> sampled;
      if (!g["sampled"].is_object()) throw Error(ErrorKind::Config, "grid.sampled must be an object");
      for (const auto& [name, scale] : g["sampled"].items()) {
        if (!scale.is_number()) throw Error(ErrorKind::Config, "grid.sampled." + name + " must be a number");
        sampled.push_back({name, scale.get<double>()});
      }
      c.grid_sampled = std::move(sampled);
    }
    if (g.contains("draws")) c.grid_draws = read<std::size_t>(g, "draws", "grid.");
  }
  if (j.contains("folds")) {
    const auto& f = j["folds"];
    reject_unknown(f, {"select_k", "report_k", "strategy"}, "folds.");
    if (f.contains("select_k")) c.select_k = read<int>(f, "select_k", "folds.");
    if (f.contains("report_k")) c.report_k = read<int>(f, "report_k", "folds.");
    if (f.contains("strategy")) c.strategy = eval::parse_fold_strategy(read<std::string>(f, "strategy", "folds."));
  }
  if (j.contains("seed")) c.seed = read<std::uint64_t>(j, "seed", "");
  if (j.contains("threads")) c.threads = read<unsigned>(j, "threads", "");
  if (j.contains("output")) {
    reject_unknown(j["output"], {"dir"}, "output.");
    if (j["output"].contains("dir")) c.output_dir = read<std::string>(j["output"], "dir", "output.");
  }
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["data"] = {{"transcripts", c.transcripts},
               {"embeddings", c.embeddings ? Json(*c.embeddings) : Json(nullptr)},
               {"lenient", c.lenient},
               {"id_layout", c.id_layout}};
  j["variant"] = data::to_string(c.variant);
  j["model"] = {{"kind", pipeline::to_string(c.model.kind)},
                {"task", pipeline::to_string(c.model.task)},
                {"params", params_object(c.model.params)}};
  Json grid;
  grid["preset"] = c.grid == GridPreset::Published ? "published" : "none";
  if (c.grid_axes) {
    Json axes = Json::object();
    for (const auto& a : *c.grid_axes) {
      Json values = Json::array();
      for (const auto& v : a.values) values.push_back(eval::to_json(v));
      axes[a.name] = values;
    }
    grid["axes"] = axes;
  }
  if (c.grid_sampled) {
    Json sampled = Json::object();
    for (const auto& s : *c.grid_sampled) sampled[s.name] = s.scale;
    grid["sampled"] = sampled;
  }
  grid["draws"] = c.grid_draws;
  j["grid"] = grid;
  j["folds"] = {{"select_k", c.select_k}, {"report_k", c.report_k}, {"strategy", eval::to_string(c.strategy)}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

std::vector<chat::Transcript> parse_directory(const std::string& dir, const chat::ParseOptions& options,
                                              std::vector<std::string>* warnings) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
    if (it->is_regular_file() && it->path().extension() == ".cha") files.push_back(it->path());
  if (ec) throw Error(ErrorKind::Io, "cannot read directory " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<chat::Transcript> out;
  for (const auto& f : files) {
    try {
      out.push_back(chat::parse_file(f.string(), options, warnings));
    } catch (const Error& e) {
      if (classify(e.kind()) != ErrorClass::Data) throw;
      if (warnings) warnings->push_back(std::string(to_string(e.kind())) + ": skipped " + f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorKind::DataFormat, "no parseable .cha files under " + dir);
  return out;
}

data::Dataset load_dataset(const std::string& path, data::Variant variant, bool lenient,
                           const std::string& id_layout, std::vector<std::string>* warnings) {
  chat::ParseOptions options;
  options.strict_envelope = !lenient;
  if (!id_layout.empty()) options.layout = chat::IdFieldLayout::parse(id_layout);
  if (fs::is_directory(path)) return data::build_variant(parse_directory(path, options, warnings), variant, warnings);
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "no such file or directory: " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".cha")
    return data::build_variant({chat::parse_file(path, options, warnings)}, variant, warnings);
  const auto text = io::read_text_file(path);
  const auto first = text.substr(0, text.find('\n'));
  bool dataset_file = false;
  try {
    dataset_file = Json::parse(first).contains("variant");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, path + ": first line is not JSON: " + e.what());
  }
  if (dataset_file) {
    auto ds = data::read_dataset_jsonl(text);
    if (ds.variant != variant)
      throw Error(ErrorKind::DataFormat, path + " holds variant " + std::string(data::to_string(ds.variant)) +
                                             ", expected " + std::string(data::to_string(variant)));
    return ds;
  }
  return data::build_variant(io::read_transcripts_jsonl(text), variant, warnings);
}

std::optional<eval::GridSpec> search_space(const ExperimentConfig& c) {
  using pipeline::ModelKind;
  eval::GridSpec g;
  if (c.grid == GridPreset::Published) {
    switch (c.model.kind) {
      case ModelKind::Svm: g = eval::svm_grid(); break;
      case ModelKind::Gbdt: g = eval::gbdt_grid(); break;
      case ModelKind::SvmCrf:
      case ModelKind::GbdtCrf: g = eval::crf_random_search(0, c.grid_draws); break;
      case ModelKind::EmbedLogistic:
      case ModelKind::EmbedLasso: {
        eval::Axis axis{c.model.kind == ModelKind::EmbedLogistic ? "lambda" : "alpha", {}};
        for (double v : linear::default_regularization_grid()) axis.values.push_back(v);
        g.axes = {axis};
        break;
      }
    }
  }
  if (c.grid_axes) g.axes = *c.grid_axes;
  if (c.grid_sampled) g.sampled = *c.grid_sampled;
  g.draws = c.grid_draws;
  if (g.axes.empty() && g.sampled.empty()) return std::nullopt;
  return g;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const eval::ClassificationMetrics& m) {
  auto scores = [](const eval::ClassScores& s) {
    return Json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  Json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.macro_precision;
  j["recall"] = m.macro_recall;
  j["f1"] = m.macro_f1;
  j["ad"] = scores(m.ad);
  j["non_ad"] = scores(m.non_ad);
  j["undefined_ratio"] = m.undefined_ratio;
  return j;
}

Json metrics_json(const ExperimentConfig& c, const eval::ParamSet& params, const eval::MetricsReport& r) {
  Json j;
  j["variant"] = data::to_string(c.variant);
  j["model"] = pipeline::to_string(c.model.kind);
  j["task"] = pipeline::to_string(c.model.task);
  j["embedding_model"] = nullptr;
  j["params"] = eval::to_json(params);
  j["report_k"] = c.report_k;
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    Json fj;
    fj["n_valid"] = f.n_valid;
    if (f.classification) fj["classification"] = to_json(*f.classification);
    if (f.rmse) fj["rmse"] = *f.rmse;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  Json mean;
  if (r.mean_classification) mean["classification"] = to_json(*r.mean_classification);
  if (r.mean_rmse) mean["rmse"] = *r.mean_rmse;
  j["mean"] = mean;
  return j;
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  s.append(s.size() < width ? width - s.size() : 1, ' ');
  return s;
}

}  // namespace

std::string folds_csv(const eval::MetricsReport& r) {
  std::string out = "fold,n_valid,accuracy,precision,recall,f1,rmse\n";
  for (std::size_t i = 0; i < r.folds.size(); ++i) {
    const auto& f = r.folds[i];
    out += std::to_string(i) + "," + std::to_string(f.n_valid) + ",";
    if (f.classification) {
      const auto& m = *f.classification;
      out += fixed(m.accuracy, 6) + "," + fixed(m.macro_precision, 6) + "," + fixed(m.macro_recall, 6) + "," +
             fixed(m.macro_f1, 6) + ",";
    } else {
      out += ",,,,";
    }
    out += (f.rmse ? fixed(*f.rmse, 6) : std::string()) + "\n";
  }
  return out;
}

std::string dataset_label(data::Variant v) {
  switch (v) {
    case data::Variant::PAR: return "PAR";
    case data::Variant::PAR_INV: return "PAR+INV";
    case data::Variant::PAR_TIME: return "PAR+TIME";
    case data::Variant::PAR_SPLT: return "PAR_SPLT";
    case data::Variant::PAR_SPLT_T: return "PAR_SPLT+T";
    case data::Variant::PAR_SPLT_T_D: return "PAR_SPLT+T+D";
  }
  return "?";
}

std::string model_label(pipeline::ModelKind kind, const std::string& embedding_model) {
  using pipeline::ModelKind;
  switch (kind) {
    case ModelKind::Svm: return "SVM";
    case ModelKind::Gbdt: return "GBDT";
    case ModelKind::SvmCrf: return "SVM+CRF";
    case ModelKind::GbdtCrf: return "GBDT+CRF";
    default: break;
  }
  std::string m;
  for (char ch : embedding_model) m += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  const bool large = m.find("large") != std::string::npos;
  if (m.find("distilroberta") != std::string::npos) return "DistilRoBERTa";
  if (m.find("distilbert") != std::string::npos) return "DistilBERT";
  if (m.find("roberta") != std::string::npos) return large ? "RoBERTa(large)" : "RoBERTa(base)";
  if (m.find("bert") != std::string::npos) return large ? "BERT(large)" : "BERT(base)";
  return embedding_model.empty() ? "embedding" : embedding_model;
}

std::string summary_text(const Json& metrics) {
  const auto variant = data::parse_variant(metrics.at("variant").get<std::string>());
  const auto kind = pipeline::parse_model_kind(metrics.at("model").get<std::string>());
  const auto emb = metrics.contains("embedding_model") && metrics["embedding_model"].is_string()
                       ? metrics["embedding_model"].get<std::string>()
                       : std::string();
  std::string out = pad("Dataset", 14) + pad("Model", 16) + pad("Acc", 8) + pad("Prec", 8) + pad("Recall", 8) +
                    pad("F1", 8) + "RMSE\n";
  out += pad(dataset_label(variant), 14) + pad(model_label(kind, emb), 16);
  const auto& mean = metrics.at("mean");
  if (mean.contains("classification")) {
    const auto& c = mean["classification"];
    for (const char* k : {"accuracy", "precision", "recall", "f1"}) out += pad(fixed(c.at(k).get<double>(), 2), 8);
  } else {
    for (int i = 0; i < 4; ++i) out += pad("-", 8);
  }
  out += mean.contains("rmse") ? fixed(mean["rmse"].get<double>(), 2) : std::string("-");
  return out + "\n";
}

namespace {

// Loaded data and the seeds derived from the master seed, shared by the
// selection, final fit and reporting steps.
struct Session {
  std::optional<linear::EmbeddingMatrix> embeddings;
  pipeline::Corpus corpus;
  std::vector<std::size_t> units;
  std::vector<std::string> warnings;
  std::uint64_t select_seed = 0;
  std::uint64_t report_seed = 0;
  std::uint64_t fit_seed = 0;
  std::uint64_t grid_seed = 0;
  eval::ParamSet base;
};

Session open_session(const ExperimentConfig& config) {
  config.validate();
  Session s;
  if (config.embeddings) s.embeddings = linear::load_embeddings(*config.embeddings);
  const auto dataset =
      load_dataset(config.transcripts, config.variant, config.lenient, config.id_layout, &s.warnings);
  s.corpus = pipeline::make_corpus(dataset, s.embeddings);
  s.units = pipeline::usable_units(s.corpus, config.model.task);
  Rng rng(config.seed);
  s.select_seed = rng.fork();
  s.report_seed = rng.fork();
  s.fit_seed = rng.fork();
  s.grid_seed = rng.fork();
  s.base = eval::merge(pipeline::default_params(config.model.kind), config.model.params);
  return s;
}

Selection select(const ExperimentConfig& config, const Session& s) {
  Selection out;
  out.params = s.base;
  out.n_units = s.units.size();
  out.warnings = s.warnings;
  auto space = search_space(config);
  if (!space) return out;
  if (s.units.size() < static_cast<std::size_t>(config.select_k))
    throw Error(ErrorKind::TooFewGroups, std::to_string(s.units.size()) + " usable transcripts for " +
                                             std::to_string(config.select_k) + "-fold selection");
  space->seed = s.grid_seed;
  const auto configs = eval::enumerate_configs(*space);
  const auto folds = pipeline::unit_folds(s.corpus, s.units, {config.select_k, config.strategy, s.select_seed});
  pipeline::FitCache cache;
  const auto score = [&](const eval::ParamSet& p) {
    pipeline::ModelSpec spec = config.model;
    spec.params = eval::merge(s.base, p);
    return pipeline::selection_score(
        eval::summarize(pipeline::cross_validate(s.corpus, s.units, folds, spec, s.fit_seed, &cache)), spec.task);
  };
  out.search = eval::grid_search(configs, score, config.threads);
  out.params = eval::merge(s.base, out.search->results[out.search->best].params);
  return out;
}

}  // namespace

Selection select_params(const ExperimentConfig& config) {
  const auto session = open_session(config);
  return select(config, session);
}

TrainResult train_final(const ExperimentConfig& config) {
  const auto session = open_session(config);
  TrainResult out;
  out.selection = select(config, session);
  if (session.units.empty()) throw Error(ErrorKind::MissingLabel, "no usable transcripts to train on");
  pipeline::ModelSpec spec = config.model;
  spec.params = out.selection.params;
  out.model = pipeline::fit_pipeline(session.corpus, session.units, spec, session.fit_seed);
  if (session.embeddings && session.embeddings->provenance)
    out.embedding_model = session.embeddings->provenance->model_name;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto session = open_session(config);
  const auto& corpus = session.corpus;
  const auto& units = session.units;
  const auto& embeddings = session.embeddings;
  const std::uint64_t select_seed = session.select_seed;
  const std::uint64_t report_seed = session.report_seed;
  const std::uint64_t fit_seed = session.fit_seed;
  const std::uint64_t grid_seed = session.grid_seed;
  ExperimentResult result;
  result.warnings = session.warnings;
  result.n_units = units.size();
  if (units.size() < static_cast<std::size_t>(config.report_k))
    throw Error(ErrorKind::TooFewGroups, std::to_string(units.size()) + " usable transcripts for " +
                                             std::to_string(config.report_k) + "-fold reporting");
  auto selection = select(config, session);
  result.search = std::move(selection.search);
  result.params = std::move(selection.params);

  pipeline::ModelSpec spec = config.model;
  spec.params = result.params;
  const auto folds = pipeline::unit_folds(corpus, units, {config.report_k, config.strategy, report_seed});
  result.report = eval::summarize(pipeline::cross_validate(corpus, units, folds, spec, fit_seed));

  result.metrics = metrics_json(config, result.params, result.report);
  if (embeddings && embeddings->provenance) result.metrics["embedding_model"] = embeddings->provenance->model_name;

  const auto config_json = to_json(config);
  Json& man = result.manifest;
  man["tool"] = "adscreen";
  man["version"] = kVersion;
  man["config_hash"] = fnv1a_hex(config_json.dump());
  man["config"] = config_json;
  man["seeds"] = {{"master", config.seed},
                  {"select_folds", select_seed},
                  {"report_folds", report_seed},
                  {"fit", fit_seed},
                  {"grid", grid_seed}};
  man["n_transcripts"] = corpus.size();
  man["n_used"] = units.size();
  if (result.search) {
    std::size_t failed = 0;
    for (const auto& r : result.search->results) failed += r.error_kind.has_value();
    man["search"] = {{"n_configs", result.search->results.size()},
                     {"failed", failed},
                     {"best_index", result.search->best},
                     {"best_score", *result.search->results[result.search->best].score}};
  } else {
    man["search"] = nullptr;
  }
  man["warnings"] = result.warnings.size();
  man["metrics"] = result.metrics;

  if (!config.output_dir.empty()) {
    const fs::path dir(config.output_dir);
    io::atomic_write_file((dir / "metrics.json").string(), result.metrics.dump(2) + "\n");
    io::atomic_write_file((dir / "folds.csv").string(), folds_csv(result.report));
    io::atomic_write_file((dir / "summary.txt").string(), summary_text(result.metrics));
    if (result.search) io::atomic_write_file((dir / "search.json").string(), eval::to_json(*result.search).dump(2) + "\n");
    io::atomic_write_file((dir / "manifest.json").string(), man.dump(2) + "\n");
  }
  return result;
}

const std::vector<ReferenceRow>& table2() {
  static const std::vector<ReferenceRow> rows = {
      {"PAR", "GBDT", .82, .84, .82, .81, 5.93},
      {"PAR", "SVM", .86, .90, .83, .86, 6.57},
      {"PAR", "DistilBERT", .87, .90, .87, .87, 4.49},
      {"PAR", "DistilRoBERTa", .84, .86, .85, .82, 5.12},
      {"PAR", "BERT(base)", .84, .86, .85, .82, 5.12},
      {"PAR", "RoBERTa(base)", .75, .79, .72, .74, 7.11},
      {"PAR", "BERT(large)", .77, .80, .77, .76, 6.64},
      {"PAR", "RoBERTa(large)", .77, .81, .73, .76, 7.13},
      {"PAR+INV", "GBDT", .79, .80, .82, .79, 5.60},
      {"PAR+INV", "SVM", .88, .92, .87, .87, 6.74},
      {"PAR+INV", "DistilBERT", .87, .89, .89, .88, 4.85},
      {"PAR+INV", "DistilRoBERTa", .80, .87, .79, .78, 7.11},
      {"PAR+INV", "BERT(base)", .75, .76, .78, .74, 7.13},
      {"PAR+INV", "RoBERTa(base)", .72, .71, .71, .69, 5.45},
      {"PAR+INV", "BERT(large)", .75, .78, .73, .74, 7.13},
      {"PAR+INV", "RoBERTa(large)", .81, .88, .76, .79, 6.64},
      {"PAR_SPLT", "SVM+CRF", .88, .88, .88, .87, std::nullopt},
      {"PAR_SPLT", "GBDT+CRF", .80, .84, .74, .78, std::nullopt},
      {"PAR_SPLT+T", "SVM+CRF", .89, .87, .90, .88, std::nullopt},
      {"PAR_SPLT+T", "GBDT+CRF", .82, .84, .79, .81, std::nullopt},
      {"PAR_SPLT+T+D", "SVM+CRF", .86, .85, .87, .86, std::nullopt},
      {"PAR_SPLT+T+D", "GBDT+CRF", .83, .86, .79, .81, std::nullopt},
  };
  return rows;
}

std::string compare_table2(const std::vector<Json>& metrics) {
  struct Ours {
    std::optional<Json> classification;
    std::optional<double> rmse;
  };
  std::map<std::pair<std::string, std::string>, Ours> ours;
  for (const auto& m : metrics) {
    const auto variant = data::parse_variant(m.at("variant").get<std::string>());
    const auto kind = pipeline::parse_model_kind(m.at("model").get<std::string>());
    const auto emb = m.contains("embedding_model") && m["embedding_model"].is_string()
                         ? m["embedding_model"].get<std::string>()
                         : std::string();
    auto& o = ours[{dataset_label(variant), model_label(kind, emb)}];
    const auto& mean = m.at("mean");
    if (mean.contains("classification")) o.classification = mean["classification"];
    if (mean.contains("rmse")) o.rmse = mean["rmse"].get<double>();
  }

  std::string out = "Comparison with the published 10-fold CV results (ours / published / difference).\n";
  out += "Rows marked * differ by more than 0.05 on some classification metric.\n\n";
  out += pad("Dataset", 14) + pad("Model", 16) + pad("Acc", 20) + pad("Prec", 20) + pad("Recall", 20) +
         pad("F1", 20) + "RMSE\n";
  std::size_t matched = 0;
  for (const auto& row : table2()) {
    const auto it = ours.find({row.dataset, row.model});
    std::string line = pad(row.dataset, 14) + pad(row.model, 16);
    bool off = false;
    const auto cell = [&](std::optional<double> mine, double theirs, bool flag) {
      if (!mine) return pad("- / " + fixed(theirs, 2), 20);
      const double d = *mine - theirs;
      if (flag && std::abs(d) > 0.05) off = true;
      return pad(fixed(*mine, 2) + " / " + fixed(theirs, 2) + " / " + (d >= 0 ? "+" : "") + fixed(d, 2), 20);
    };
    const Ours* o = it == ours.end() ? nullptr : &it->second;
    if (o) ++matched;
    const auto value = [&](const char* key) -> std::optional<double> {
      if (!o || !o->classification) return std::nullopt;
      return (*o->classification)[key].get<double>();
    };
    line += cell(value("accuracy"), row.accuracy, true);
    line += cell(value("precision"), row.precision, true);
    line += cell(value("recall"), row.recall, true);
    line += cell(value("f1"), row.f1, true);
    if (row.rmse)
      line += (o && o->rmse) ? fixed(*o->rmse, 2) + " / " + fixed(*row.rmse, 2) + " / " +
                                   (*o->rmse >= *row.rmse ? "+" : "") + fixed(*o->rmse - *row.rmse, 2)
                             : "- / " + fixed(*row.rmse, 2);
    else
      line += "-";
    out += line + (off ? " *" : "") + "\n";
  }
  out += "\n" + std::to_string(matched) + " of " + std::to_string(table2().size()) + " published rows have a matching run.\n";
  return out;
}

}  // namespace adscreen::experiment
