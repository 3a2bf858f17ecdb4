#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adscreen/dataset.hpp"
#include "adscreen/error.hpp"
#include "adscreen/experiment.hpp"
#include "adscreen/io.hpp"
#include "adscreen/linear_heads.hpp"
#include "adscreen/pipeline.hpp"

namespace adscreen::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Io {
  std::ostream& out;
  std::ostream& err;
  bool quiet = false;
};

void print_warnings(const Io& io, const std::vector<std::string>& warnings) {
  if (io.quiet) return;
  for (const auto& w : warnings) io.err << "warning: " << w << "\n";
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int report_error(const Io& io, const Error& e) {
  const auto cls = classify(e.kind());
  const char* name = cls == ErrorClass::Usage ? "usage" : cls == ErrorClass::Data ? "data" : "internal";
  io.err << "error: " << name << ": " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
  return cls == ErrorClass::Usage ? 2 : cls == ErrorClass::Data ? 3 : 70;
}

Json read_json_file(const std::string& path) {
  const auto text = io::read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, path + ": " + e.what());
  }
}

// Inline JSON, or a path to a JSON file. A search.json file contributes its
// winning parameters.
Json json_argument(const std::string& value, const std::string& flag) {
  const auto first = value.find_first_not_of(" \t");
  if (first != std::string::npos && (value[first] == '{' || value[first] == '[')) {
    try {
      return Json::parse(value);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Config, flag + ": " + e.what());
    }
  }
  auto j = read_json_file(value);
  if (j.is_object() && j.contains("best_params")) return j["best_params"];
  return j;
}

// Flags mirroring the configuration keys. Values left unset do not touch the
// configuration file.
struct ExperimentFlags {
  std::optional<std::string> config;
  std::optional<std::string> transcripts;
  std::optional<std::string> embeddings;
  bool lenient = false;
  std::optional<std::string> id_layout;
  std::optional<std::string> variant;
  std::optional<std::string> model;
  std::optional<std::string> task;
  std::optional<std::string> params;
  std::optional<std::string> grid;
  std::optional<std::string> grid_axes;
  std::optional<std::string> grid_sampled;
  std::optional<std::size_t> grid_draws;
  std::optional<int> select_k;
  std::optional<int> report_k;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> output;
};

const std::vector<std::pair<std::string, std::string>>& flag_for_key() {
  static const std::vector<std::pair<std::string, std::string>> flags = {
      {"data.transcripts", "--in"},      {"data.embeddings", "--embeddings"},
      {"data.lenient", "--lenient"},     {"data.id_layout", "--id-layout"},
      {"variant", "--variant"},          {"model.kind", "--model"},
      {"model.task", "--task"},          {"model.params", "--params"},
      {"grid.preset", "--grid"},         {"grid.axes", "--grid-axes"},
      {"grid.sampled", "--grid-sampled"}, {"grid.draws", "--grid-draws"},
      {"folds.select_k", "--select-k"},  {"folds.report_k", "--report-k"},
      {"folds.strategy", "--strategy"},  {"seed", "--seed"},
      {"threads", "--threads"},          {"output.dir", "--out"},
  };
  return flags;
}

std::string description_of(const std::string& key) {
  for (const auto& [k, d] : experiment::config_keys())
    if (k == key) return d;
  return {};
}

std::string config_footer() {
  std::ostringstream s;
  s << "Configuration keys (JSON file) and the flags that override them:\n";
  for (const auto& [key, flag] : flag_for_key()) {
    std::string left = "  " + key;
    left.resize(std::max<std::size_t>(left.size() + 1, 20), ' ');
    std::string mid = flag;
    mid.resize(std::max<std::size_t>(mid.size() + 1, 16), ' ');
    s << left << mid << description_of(key) << "\n";
  }
  s << "Flags win over the file. ADSCREEN_SEED sets the seed when neither does.";
  return s.str();
}

void add_data_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--in", f.transcripts, "Transcripts: .cha directory or file, transcripts JSONL or dataset JSONL");
  cmd->add_option("--embeddings", f.embeddings, "Embedding CSV with a .json provenance sidecar");
  cmd->add_flag("--lenient", f.lenient, "Accept .cha files without @Begin/@End");
  cmd->add_option("--id-layout", f.id_layout, "@ID slot layout, e.g. mmse=9 (default: default)");
  cmd->add_option("--variant", f.variant, "Dataset variant")
      ->check(CLI::IsMember({"PAR", "PAR_INV", "PAR_TIME", "PAR_SPLT", "PAR_SPLT_T", "PAR_SPLT_T_D"}));
}

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f, bool config_option) {
  if (config_option) cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  add_data_flags(cmd, f);
  cmd->add_option("--model", f.model, "Model kind")
      ->check(CLI::IsMember({"svm", "gbdt", "svm_crf", "gbdt_crf", "embed_logistic", "embed_lasso"}));
  cmd->add_option("--task", f.task, "classify or regress")->check(CLI::IsMember({"classify", "regress"}));
  cmd->add_option("--params", f.params, "Fixed hyper-parameters: inline JSON object or JSON file (search.json works)");
  cmd->add_option("--grid", f.grid, "Search space preset")->check(CLI::IsMember({"published", "none"}));
  cmd->add_option("--grid-axes", f.grid_axes, "JSON object: parameter -> list of values");
  cmd->add_option("--grid-sampled", f.grid_sampled, "JSON object: parameter -> exponential scale");
  cmd->add_option("--grid-draws", f.grid_draws, "Joint exponential draws");
  cmd->add_option("--select-k", f.select_k, "Folds for hyper-parameter selection");
  cmd->add_option("--report-k", f.report_k, "Folds for reported metrics");
  cmd->add_option("--strategy", f.strategy, "Fold assignment")->check(CLI::IsMember({"stratified", "grouped"}));
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--threads", f.threads, "Search worker threads (0 = one per core)");
  cmd->add_option("--out", f.output, "Output directory");
  cmd->footer(config_footer());
}

// Layering: subcommand defaults < configuration file < flags. The seed falls
// back to ADSCREEN_SEED when neither the file nor a flag sets it.
experiment::ExperimentConfig resolve_config(const ExperimentFlags& f, const std::optional<std::string>& config_path,
                                            const std::string& default_grid) {
  Json j = Json::object();
  j["grid"]["preset"] = default_grid;
  bool seed_set = false;
  if (config_path) {
    const auto file = read_json_file(*config_path);
    if (!file.is_object()) throw Error(ErrorKind::Config, *config_path + " must hold a JSON object");
    seed_set = file.contains("seed");
    j.merge_patch(file);
  }
  const auto set = [&](std::initializer_list<const char*> path, Json value) {
    Json* node = &j;
    auto it = path.begin();
    for (; std::next(it) != path.end(); ++it) node = &(*node)[*it];
    (*node)[*it] = std::move(value);
  };
  if (f.transcripts) set({"data", "transcripts"}, *f.transcripts);
  if (f.embeddings) set({"data", "embeddings"}, *f.embeddings);
  if (f.lenient) set({"data", "lenient"}, true);
  if (f.id_layout) set({"data", "id_layout"}, *f.id_layout);
  if (f.variant) set({"variant"}, *f.variant);
  if (f.model) set({"model", "kind"}, *f.model);
  if (f.task) set({"model", "task"}, *f.task);
  if (f.params) set({"model", "params"}, json_argument(*f.params, "--params"));
  if (f.grid) set({"grid", "preset"}, *f.grid);
  if (f.grid_axes) set({"grid", "axes"}, json_argument(*f.grid_axes, "--grid-axes"));
  if (f.grid_sampled) set({"grid", "sampled"}, json_argument(*f.grid_sampled, "--grid-sampled"));
  if (f.grid_draws) set({"grid", "draws"}, *f.grid_draws);
  if (f.select_k) set({"folds", "select_k"}, *f.select_k);
  if (f.report_k) set({"folds", "report_k"}, *f.report_k);
  if (f.strategy) set({"folds", "strategy"}, *f.strategy);
  if (f.threads) set({"threads"}, *f.threads);
  if (f.output) set({"output", "dir"}, *f.output);
  if (f.seed) {
    set({"seed"}, *f.seed);
  } else if (!seed_set) {
    if (const char* env = std::getenv("ADSCREEN_SEED"); env && *env) {
      char* end = nullptr;
      const auto v = std::strtoull(env, &end, 10);
      if (*end != '\0') throw Error(ErrorKind::Config, std::string("ADSCREEN_SEED is not an integer: ") + env);
      set({"seed"}, static_cast<std::uint64_t>(v));
    }
  }
  return experiment::config_from_json(j);
}

void require_output(const experiment::ExperimentConfig& c, const char* what) {
  if (c.output_dir.empty()) throw Error(ErrorKind::Config, std::string(what) + " needs --out or output.dir");
}

void write_experiment(const Io& io, const experiment::ExperimentResult& r) {
  print_warnings(io, r.warnings);
  io.out << experiment::summary_text(r.metrics);
}

int cmd_parse(const Io& io, const std::vector<std::string>& inputs, const std::optional<std::string>& out,
              const std::string& id_layout, bool lenient) {
  chat::ParseOptions options;
  options.strict_envelope = !lenient;
  options.layout = chat::IdFieldLayout::parse(id_layout);
  std::vector<std::string> warnings;
  std::vector<chat::Transcript> transcripts;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      auto part = experiment::parse_directory(in, options, &warnings);
      for (auto& t : part) transcripts.push_back(std::move(t));
    } else {
      if (!fs::exists(in)) throw Error(ErrorKind::Io, "no such file or directory: " + in);
      transcripts.push_back(chat::parse_file(in, options, &warnings));
    }
  }
  std::set<std::string> seen;
  for (const auto& t : transcripts)
    if (!seen.insert(t.meta.transcript_id).second) throw Error(ErrorKind::DataFormat, "duplicate transcript id " + t.meta.transcript_id);
  print_warnings(io, warnings);
  const auto text = io::write_transcripts_jsonl(transcripts);
  if (out) {
    io::atomic_write_file(*out, text);
    if (!io.quiet) io.err << "parsed " << transcripts.size() << " transcripts into " << *out << "\n";
  } else {
    io.out << text;
  }
  return 0;
}

int cmd_build(const Io& io, const ExperimentFlags& f, const std::string& out_dir) {
  if (!f.transcripts) throw Error(ErrorKind::Config, "build needs --in");
  const auto variant = data::parse_variant(f.variant.value_or("PAR"));
  std::vector<std::string> warnings;
  const auto ds = experiment::load_dataset(*f.transcripts, variant, f.lenient, f.id_layout.value_or(""), &warnings);
  print_warnings(io, warnings);
  const auto path = (fs::path(out_dir) / (std::string(data::to_string(variant)) + ".jsonl")).string();
  io::atomic_write_file(path, data::write_dataset_jsonl(ds));
  const auto rows = data::is_utterance_level(variant) ? ds.segments.size() : ds.documents.size();
  io.out << path << "\t" << rows << " rows\n";
  return 0;
}

int cmd_train(const Io& io, const ExperimentFlags& f) {
  const auto config = resolve_config(f, f.config, "none");
  require_output(config, "train");
  const auto trained = experiment::train_final(config);
  print_warnings(io, trained.selection.warnings);
  Json j;
  j["tool"] = "adscreen";
  j["version"] = experiment::kVersion;
  j["params"] = eval::to_json(trained.selection.params);
  j["n_train"] = trained.selection.n_units;
  j["embedding_model"] = trained.embedding_model.empty() ? Json(nullptr) : Json(trained.embedding_model);
  j["pipeline"] = pipeline::to_json(trained.model);
  const auto dir = fs::path(config.output_dir);
  if (trained.selection.search)
    io::atomic_write_file((dir / "search.json").string(), eval::to_json(*trained.selection.search).dump(2) + "\n");
  const auto path = (dir / "model.json").string();
  io::atomic_write_file(path, j.dump() + "\n");
  io.out << path << "\t" << eval::to_json(trained.selection.params).dump() << "\n";
  return 0;
}

int cmd_gridsearch(const Io& io, const ExperimentFlags& f) {
  const auto config = resolve_config(f, f.config, "published");
  const auto sel = experiment::select_params(config);
  print_warnings(io, sel.warnings);
  if (!sel.search) throw Error(ErrorKind::Config, "gridsearch with grid.preset none and no grid.axes has nothing to search");
  const auto text = eval::to_json(*sel.search).dump(2) + "\n";
  if (!config.output_dir.empty()) io::atomic_write_file((fs::path(config.output_dir) / "search.json").string(), text);
  const auto& best = sel.search->results[sel.search->best];
  io.out << "configs\t" << sel.search->results.size() << "\nbest_score\t" << *best.score << "\nbest_params\t"
         << eval::to_json(sel.params).dump() << "\n";
  return 0;
}

int cmd_evaluate(const Io& io, const ExperimentFlags& f, const std::optional<std::string>& config_path,
                 const std::string& default_grid) {
  const auto config = resolve_config(f, config_path, default_grid);
  write_experiment(io, experiment::run_experiment(config));
  return 0;
}

int cmd_predict(const Io& io, const std::string& model_path, const ExperimentFlags& f,
                const std::optional<std::string>& out) {
  if (!f.transcripts) throw Error(ErrorKind::Config, "predict needs --in");
  const auto j = read_json_file(model_path);
  const auto model = pipeline::pipeline_from_json(j.contains("pipeline") ? j["pipeline"] : j);
  if (f.variant && data::parse_variant(*f.variant) != model.variant)
    throw Error(ErrorKind::UnsupportedCombination, "model was trained on " + std::string(data::to_string(model.variant)) +
                                                       ", not " + *f.variant);
  std::optional<linear::EmbeddingMatrix> embeddings;
  if (pipeline::uses_embeddings(model.spec.kind)) {
    if (!f.embeddings) throw Error(ErrorKind::Config, "this model needs --embeddings");
    embeddings = linear::load_embeddings(*f.embeddings);
  }
  std::vector<std::string> warnings;
  const auto ds = experiment::load_dataset(*f.transcripts, model.variant, f.lenient, f.id_layout.value_or(""), &warnings);
  print_warnings(io, warnings);
  const auto corpus = pipeline::make_corpus(ds, embeddings);
  std::vector<std::size_t> units(corpus.size());
  for (std::size_t i = 0; i < units.size(); ++i) units[i] = i;
  const auto pred = pipeline::predict_pipeline(model, corpus, units);
  const bool classify = model.spec.task == pipeline::Task::Classify;
  std::string csv = classify ? "id,label,score\n" : "id,mmse\n";
  for (std::size_t k = 0; k < units.size(); ++k) {
    char num[64];
    std::snprintf(num, sizeof num, "%.10g", pred.scores[k]);
    csv += corpus.ids[units[k]] + ",";
    if (classify) csv += std::string(pred.labels[k] == 1 ? "AD" : "Control") + ",";
    csv += std::string(num) + "\n";
  }
  if (out) {
    io::atomic_write_file(*out, csv);
  } else {
    io.out << csv;
  }
  return 0;
}

int cmd_report(const Io& io, const std::vector<std::string>& inputs, const std::optional<std::string>& compare,
               const std::optional<std::string>& out) {
  std::vector<Json> metrics;
  std::string text;
  for (const auto& in : inputs) {
    const auto path = fs::is_directory(in) ? (fs::path(in) / "metrics.json").string() : in;
    auto m = read_json_file(path);
    if (!m.is_object() || !m.contains("mean"))
      throw Error(ErrorKind::DataFormat, path + " is not a metrics.json file");
    const auto summary = experiment::summary_text(m);
    text += metrics.empty() ? summary : summary.substr(summary.find('\n') + 1);
    metrics.push_back(std::move(m));
  }
  if (compare) {
    if (*compare != "table2") throw Error(ErrorKind::Config, "--compare accepts only table2");
    text += "\n" + experiment::compare_table2(metrics);
  }
  if (out) {
    io::atomic_write_file(*out, text);
  } else {
    io.out << text;
  }
  return 0;
}

bool is_model_alias(const std::string& s) {
  return s == "crf" || s == "svm" || s == "gbdt" || s == "svm_crf" || s == "gbdt_crf" || s == "embed_logistic" ||
         s == "embed_lasso";
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Io io{out, err};
  std::vector<std::string> args = raw_args;
  // `adscreen <model> ...` is shorthand for `adscreen evaluate --model <model> ...`.
  if (!args.empty() && is_model_alias(args[0])) {
    const auto kind = args[0] == "crf" ? std::string("svm_crf") : args[0];
    args.erase(args.begin());
    args.insert(args.begin(), {"evaluate", "--model", kind});
  }

  CLI::App app{"adscreen: Alzheimer's screening from speech transcripts", "adscreen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", experiment::kVersion);
  app.add_flag("-q,--quiet", io.quiet, "Suppress warnings and progress messages");
  app.footer(config_footer());

  std::vector<std::string> parse_inputs;
  std::optional<std::string> parse_out;
  std::string parse_layout = "default";
  bool parse_lenient = false;
  auto* parse = app.add_subcommand("parse", "Parse .cha files or directories into transcripts JSONL");
  parse->add_option("inputs", parse_inputs, ".cha files or directories")->required();
  parse->add_option("--out", parse_out, "Output JSONL (stdout when omitted)");
  parse->add_option("--id-layout", parse_layout, "@ID slot layout")->capture_default_str();
  parse->add_flag("--lenient", parse_lenient, "Accept files without @Begin/@End");
  parse->footer(config_footer());

  ExperimentFlags build_flags;
  std::string build_out;
  auto* build = app.add_subcommand("build", "Build a dataset variant as dataset JSONL");
  add_data_flags(build, build_flags);
  build->get_option("--in")->required();
  build->add_option("--out", build_out, "Output directory; writes <variant>.jsonl")->required();
  build->footer(config_footer());

  ExperimentFlags train_flags;
  auto* train = app.add_subcommand("train", "Fit a model on every usable transcript and write model.json");
  add_experiment_flags(train, train_flags, true);

  ExperimentFlags grid_flags;
  auto* grid = app.add_subcommand("gridsearch", "Select hyper-parameters by cross-validation; writes search.json");
  add_experiment_flags(grid, grid_flags, true);

  ExperimentFlags eval_flags;
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate fixed (or searched) parameters and write metrics");
  add_experiment_flags(evaluate, eval_flags, true);

  ExperimentFlags predict_flags;
  std::string predict_model;
  std::optional<std::string> predict_out;
  auto* predict = app.add_subcommand("predict", "Score transcripts with a trained model.json");
  predict->add_option("--model", predict_model, "model.json written by train")->required();
  add_data_flags(predict, predict_flags);
  predict->get_option("--in")->required();
  predict->add_option("--out", predict_out, "Output CSV (stdout when omitted)");
  predict->footer(config_footer());

  std::vector<std::string> report_inputs;
  std::optional<std::string> report_compare;
  std::optional<std::string> report_out;
  auto* report = app.add_subcommand("report", "Summarise metrics.json files, optionally against the published table");
  report->add_option("metrics", report_inputs, "metrics.json files or run directories")->required();
  report->add_option("--compare", report_compare, "Reference table to compare with (table2)");
  report->add_option("--out", report_out, "Write the report here instead of stdout");
  report->footer(config_footer());

  ExperimentFlags run_flags;
  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "Full protocol from a configuration file: select, then report");
  run_cmd->add_option("config", run_config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  add_experiment_flags(run_cmd, run_flags, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: usage: " << e.get_name() << ": " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (parse->parsed()) return cmd_parse(io, parse_inputs, parse_out, parse_layout, parse_lenient);
    if (build->parsed()) return cmd_build(io, build_flags, build_out);
    if (train->parsed()) return cmd_train(io, train_flags);
    if (grid->parsed()) return cmd_gridsearch(io, grid_flags);
    if (evaluate->parsed()) return cmd_evaluate(io, eval_flags, eval_flags.config, "none");
    if (predict->parsed()) return cmd_predict(io, predict_model, predict_flags, predict_out);
    if (report->parsed()) return cmd_report(io, report_inputs, report_compare, report_out);
    if (run_cmd->parsed()) return cmd_evaluate(io, run_flags, run_config, "published");
  } catch (const Error& e) {
    return report_error(io, e);
  } catch (const std::bad_alloc&) {
    err << "error: internal: Invariant: out of memory\n";
    return 70;
  } catch (const std::exception& e) {
    err << "error: internal: Invariant: " << one_line(e.what()) << "\n";
    return 70;
  }
  err << "error: usage: Arguments: no subcommand\n";
  return 2;
}

}  // namespace adscreen::cli
