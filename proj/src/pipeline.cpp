#include "adscreen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adscreen/error.hpp"
#include "adscreen/rng.hpp"

namespace adscreen::pipeline {

using Json = nlohmann::ordered_json;
using eval::ParamSet;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Svm: return "svm";
    case ModelKind::Gbdt: return "gbdt";
    case ModelKind::SvmCrf: return "svm_crf";
    case ModelKind::GbdtCrf: return "gbdt_crf";
    case ModelKind::EmbedLogistic: return "embed_logistic";
    case ModelKind::EmbedLasso: return "embed_lasso";
  }
  return "?";
}

std::string_view to_string(Task task) { return task == Task::Classify ? "classify" : "regress"; }

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::Svm, ModelKind::Gbdt, ModelKind::SvmCrf, ModelKind::GbdtCrf,
                 ModelKind::EmbedLogistic, ModelKind::EmbedLasso})
    if (name == to_string(k)) return k;
  throw Error(ErrorKind::Config, "unknown model kind '" + std::string(name) +
                                     "' (svm, gbdt, svm_crf, gbdt_crf, embed_logistic, embed_lasso)");
}

Task parse_task(std::string_view name) {
  if (name == "classify") return Task::Classify;
  if (name == "regress") return Task::Regress;
  throw Error(ErrorKind::Config, "unknown task '" + std::string(name) + "' (classify, regress)");
}

bool uses_crf(ModelKind kind) { return kind == ModelKind::SvmCrf || kind == ModelKind::GbdtCrf; }

bool uses_embeddings(ModelKind kind) {
  return kind == ModelKind::EmbedLogistic || kind == ModelKind::EmbedLasso;
}

void check_combination(ModelKind kind, Task task, data::Variant variant) {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::UnsupportedCombination,
                std::string(to_string(kind)) + " with task " + std::string(to_string(task)) +
                    " on " + std::string(data::to_string(variant)) + ": " + why);
  };
  if (uses_crf(kind) && task == Task::Regress) fail("CRF models do not support regression");
  if (kind == ModelKind::EmbedLogistic && task == Task::Regress)
    fail("the logistic head only classifies; use embed_lasso for MMSE");
  if (kind == ModelKind::EmbedLasso && task == Task::Classify)
    fail("the LASSO head only regresses; use embed_logistic for AD classification");
  const bool utterance = data::is_utterance_level(variant);
  if (uses_crf(kind) && !utterance) fail("CRF models need an utterance-level variant");
  if (!uses_crf(kind) && utterance)
    fail("utterance-level variants are scored per transcript through a CRF model");
  if (uses_embeddings(kind) && variant == data::Variant::PAR_TIME)
    fail("embedding heads take no time features");
}

eval::ParamSet default_params(ModelKind kind) {
  const ParamSet svm = {{"max_features", std::int64_t{100}},
                        {"stop_words", std::string("none")},
                        {"analyzer", std::string("word")},
                        {"sublinear_tf", true},
                        {"kernel", std::string("sigmoid")},
                        {"C", 1.0}};
  const ParamSet gbdt = {{"max_features", std::int64_t{1000}},
                         {"stop_words", std::string("english")},
                         {"analyzer", std::string("word")},
                         {"sublinear_tf", true},
                         {"n_estimators", std::int64_t{100}},
                         {"max_depth", std::int64_t{5}}};
  switch (kind) {
    case ModelKind::Svm: return svm;
    case ModelKind::Gbdt: return gbdt;
    case ModelKind::SvmCrf: return eval::merge(svm, {{"c1", 0.0036}, {"c2", 0.018}});
    case ModelKind::GbdtCrf: return eval::merge(gbdt, {{"c1", 0.314}, {"c2", 0.009}});
    case ModelKind::EmbedLogistic: return {{"lambda", 0.01}};
    case ModelKind::EmbedLasso: return {{"alpha", 0.1}};
  }
  return {};
}

Corpus make_corpus(const data::Dataset& dataset, std::optional<linear::EmbeddingMatrix> embeddings) {
  Corpus c;
  c.variant = dataset.variant;
  if (data::is_utterance_level(dataset.variant)) {
    std::map<std::string, std::size_t> unit_of;
    for (const auto& s : dataset.segments) {
      auto [it, fresh] = unit_of.emplace(s.transcript_id, c.ids.size());
      if (fresh) {
        c.ids.push_back(s.transcript_id);
        c.labels.push_back(s.label == data::Label::AD ? 1 : 0);
        c.mmse.push_back(s.mmse ? std::optional<double>(*s.mmse) : std::nullopt);
        c.segments.emplace_back();
      }
      c.segments[it->second].push_back(s);
    }
  } else {
    for (const auto& d : dataset.documents) {
      c.ids.push_back(d.transcript_id);
      c.labels.push_back(d.label == data::Label::AD ? 1 : 0);
      c.mmse.push_back(d.mmse ? std::optional<double>(*d.mmse) : std::nullopt);
      c.texts.push_back(d.text);
      c.aggregates.push_back(d.aggregates);
    }
  }
  if (c.ids.empty()) throw Error(ErrorKind::DataFormat, "dataset has no labelled records");
  if (embeddings) c.embeddings = linear::align_embeddings(*embeddings, c.ids);
  return c;
}

std::vector<std::size_t> usable_units(const Corpus& corpus, Task task) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (task == Task::Classify || corpus.mmse[i]) out.push_back(i);
  return out;
}

ZScore ZScore::fit(const std::vector<std::vector<double>>& rows) {
  ZScore z;
  if (rows.empty()) return z;
  const std::size_t f = rows.front().size();
  z.mean.assign(f, 0.0);
  z.scale.assign(f, 0.0);
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < f; ++j) z.mean[j] += r[j] / n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < f; ++j) z.scale[j] += (r[j] - z.mean[j]) * (r[j] - z.mean[j]) / n;
  for (double& s : z.scale) s = s > 1e-24 ? std::sqrt(s) : 1.0;
  return z;
}

std::vector<double> ZScore::apply(std::vector<double> row) const {
  for (std::size_t j = 0; j < row.size() && j < mean.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
  return row;
}

namespace {

// Trained base text model and its out-of-fold training probabilities.
struct BaseModel {
  text::TfidfModel tfidf;
  std::optional<svm::SvmModel> svm;
  std::optional<gbdt::GbdtModel> gbdt;
};

struct StackedBase {
  std::vector<std::vector<double>> oof;  // per training unit, per segment
  BaseModel base;                        // refit on every training segment
};

// TF-IDF vocabulary and training matrix of the transcript-level models.
struct DocumentFit {
  text::TfidfModel tfidf;
  std::optional<ZScore> scaler;
  SparseMatrix X;
};

text::TfidfParams tfidf_params(const ParamSet& p) {
  auto t = text::TfidfParams::with_default_ngrams(
      text::parse_analyzer(eval::get_string(p, "analyzer", "word")));
  t.stop_words = text::parse_stop_words(eval::get_string(p, "stop_words", "none"));
  const auto mf = eval::get_int(p, "max_features", 1000);
  if (mf < 1) throw Error(ErrorKind::Config, "max_features must be >= 1");
  t.max_features = static_cast<std::size_t>(mf);
  t.sublinear_tf = eval::get_bool(p, "sublinear_tf", false);
  return t;
}

svm::SvmParams svm_params(const ParamSet& p) {
  svm::SvmParams s;
  s.kernel = svm::parse_kernel(eval::get_string(p, "kernel", "rbf"));
  s.C = eval::get_double(p, "C", 1.0);
  const auto* g = eval::find(p, "gamma");
  if (g && !(std::holds_alternative<std::string>(*g) && std::get<std::string>(*g) == "auto"))
    s.gamma = eval::get_double(p, "gamma", 1.0);
  s.coef0 = eval::get_double(p, "coef0", 0.0);
  s.epsilon = eval::get_double(p, "epsilon", 0.1);
  s.tol = eval::get_double(p, "tol", 1e-3);
  return s;
}

gbdt::GbdtParams gbdt_params(const ParamSet& p, std::uint64_t seed) {
  gbdt::GbdtParams g;
  g.n_estimators = static_cast<int>(eval::get_int(p, "n_estimators", 100));
  g.max_depth = static_cast<int>(eval::get_int(p, "max_depth", 3));
  g.learning_rate = eval::get_double(p, "learning_rate", 0.1);
  g.min_samples_leaf = static_cast<int>(eval::get_int(p, "min_samples_leaf", 1));
  g.subsample = eval::get_double(p, "subsample", 1.0);
  g.seed = seed;
  return g;
}

crf::CrfParams crf_params(const ParamSet& p, std::uint64_t seed) {
  crf::CrfParams c;
  c.c1 = eval::get_double(p, "c1", 0.0);
  c.c2 = eval::get_double(p, "c2", 0.01);
  c.max_iter = static_cast<int>(eval::get_int(p, "crf_max_iter", 1000));
  c.seed = seed;
  return c;
}

bool is_svm(ModelKind kind) { return kind == ModelKind::Svm || kind == ModelKind::SvmCrf; }

std::vector<double> aggregate_row(const std::optional<data::TimeAggregates>& a) {
  if (!a) return {0.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  return {a->mean_dur_ms, a->min_dur_ms, a->max_dur_ms, a->median_dur_ms, a->mean_gap_ms, 0.0};
}

// Observation features of one utterance apart from p(AD) and the bias.
std::vector<double> segment_extras(const data::SegmentRecord& s) {
  std::vector<double> out;
  if (s.temporal) {
    const auto& t = *s.temporal;
    out.insert(out.end(), {t.duration_ms, t.gap_before_ms, t.mean_dur_ms, t.max_dur_ms,
                           t.min_dur_ms, t.missing ? 1.0 : 0.0});
  }
  if (s.demographics) out.insert(out.end(), {s.demographics->age_years, s.demographics->sex_indicator});
  return out;
}

std::vector<std::string> extras_names(const data::SegmentRecord& s) {
  std::vector<std::string> out;
  if (s.temporal) out.insert(out.end(), {"duration", "gap_before", "mean_dur", "max_dur", "min_dur", "time_missing"});
  if (s.demographics) out.insert(out.end(), {"age", "sex"});
  return out;
}

// Texts and labels of every segment of the given units, in unit order.
void gather_segments(const Corpus& corpus, std::span<const std::size_t> units,
                     std::vector<std::string>& texts, std::vector<int>& labels) {
  for (auto u : units)
    for (const auto& s : corpus.segments[u]) {
      texts.push_back(s.text);
      labels.push_back(corpus.labels[u]);
    }
}

BaseModel fit_base(ModelKind kind, const ParamSet& params, const std::vector<std::string>& texts,
                   const std::vector<int>& labels, std::uint64_t seed) {
  BaseModel b;
  b.tfidf = text::fit_tfidf(texts, tfidf_params(params));
  const auto X = text::transform_tfidf(b.tfidf, texts);
  if (is_svm(kind)) {
    auto p = svm_params(params);
    p.probability = true;
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = labels[i] ? 1 : -1;
    b.svm = svm::train_svc(X, y, p, seed);
  } else {
    std::vector<double> y(labels.begin(), labels.end());
    b.gbdt = gbdt::train_gbdt(X, y, gbdt::Loss::Logistic, gbdt_params(params, seed));
  }
  return b;
}

std::vector<double> base_probability(const BaseModel& b, const std::vector<std::string>& texts) {
  const auto X = text::transform_tfidf(b.tfidf, texts);
  return b.svm ? svm::predict_proba(*b.svm, X) : gbdt::predict_gbdt(*b.gbdt, X);
}

std::string base_signature(ModelKind kind, const ParamSet& params, std::span<const std::size_t> units,
                           std::uint64_t seed) {
  static const char* keys[] = {"max_features", "stop_words", "analyzer", "sublinear_tf", "kernel",
                               "C", "gamma", "coef0", "tol", "n_estimators", "max_depth",
                               "learning_rate", "min_samples_leaf", "subsample"};
  std::string s(to_string(kind));
  for (const char* k : keys)
    if (const auto* v = eval::find(params, k)) s += "|" + std::string(k) + "=" + eval::to_string(*v);
  s += "|seed=" + std::to_string(seed) + "|units=";
  for (auto u : units) s += std::to_string(u) + ",";
  return s;
}

// p(AD) for every training segment, each produced by a base model that never
// saw that segment's transcript.
std::vector<std::vector<double>> out_of_fold_probabilities(const Corpus& corpus,
                                                           std::span<const std::size_t> units,
                                                           ModelKind kind, const ParamSet& params,
                                                           std::uint64_t seed) {
  std::vector<int> unit_labels;
  for (auto u : units) unit_labels.push_back(corpus.labels[u]);
  std::vector<std::string> groups;
  for (auto u : units) groups.push_back(corpus.ids[u]);
  const int k = static_cast<int>(std::min<std::size_t>(5, units.size()));
  const auto inner = eval::make_folds(unit_labels, groups, {k, eval::FoldStrategy::Grouped, seed ^ 0x2545f4914f6cdd1dULL});

  std::vector<std::vector<double>> out(units.size());
  for (std::size_t f = 0; f < inner.size(); ++f) {
    std::vector<std::size_t> tr, va;
    for (auto i : inner[f].train) tr.push_back(units[i]);
    for (auto i : inner[f].valid) va.push_back(units[i]);
    std::vector<std::string> texts;
    std::vector<int> labels;
    gather_segments(corpus, tr, texts, labels);
    const auto base = fit_base(kind, params, texts, labels, seed + f + 1);
    for (auto i : inner[f].valid) {
      std::vector<std::string> seg_texts;
      for (const auto& s : corpus.segments[units[i]]) seg_texts.push_back(s.text);
      out[i] = base_probability(base, seg_texts);
    }
  }
  return out;
}

crf::FeatureSequence crf_sequence(const Corpus& corpus, std::size_t unit,
                                  const std::vector<double>& p_ad, const ZScore& scaler) {
  crf::FeatureSequence seq;
  seq.transcript_id = corpus.ids[unit];
  const auto& segs = corpus.segments[unit];
  for (std::size_t t = 0; t < segs.size(); ++t) {
    std::vector<double> step{p_ad[t]};
    const auto extras = scaler.apply(segment_extras(segs[t]));
    step.insert(step.end(), extras.begin(), extras.end());
    step.push_back(1.0);
    seq.steps.push_back(std::move(step));
  }
  return seq;
}

Eigen::MatrixXd embedding_rows(const Corpus& corpus, std::span<const std::size_t> units) {
  if (!corpus.embeddings)
    throw Error(ErrorKind::Config, "embedding heads need an embedding file (data.embeddings)");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(units.size()), corpus.embeddings->values.cols());
  for (std::size_t i = 0; i < units.size(); ++i)
    X.row(static_cast<Eigen::Index>(i)) = corpus.embeddings->values.row(static_cast<Eigen::Index>(units[i]));
  return X;
}

SparseMatrix document_features(const FittedPipeline& m, const Corpus& corpus,
                               std::span<const std::size_t> units) {
  std::vector<std::string> docs;
  for (auto u : units) docs.push_back(corpus.texts[u]);
  auto X = text::transform_tfidf(*m.tfidf, docs);
  if (m.extra_scaler) {
    std::vector<std::vector<double>> extra;
    for (auto u : units) extra.push_back(m.extra_scaler->apply(aggregate_row(corpus.aggregates[u])));
    X = X.append_dense_columns(extra);
  }
  return X;
}

double clamp_mmse(double v) { return std::clamp(v, 0.0, 30.0); }

}  // namespace

FittedPipeline fit_pipeline(const Corpus& corpus, std::span<const std::size_t> units,
                            const ModelSpec& spec, std::uint64_t seed, FitCache* cache) {
  check_combination(spec.kind, spec.task, corpus.variant);
  if (units.empty()) throw Error(ErrorKind::DataFormat, "no training transcripts");
  FittedPipeline m;
  m.spec = spec;
  m.variant = corpus.variant;
  const auto& p = spec.params;

  std::vector<double> mmse;
  std::vector<int> labels;
  for (auto u : units) {
    labels.push_back(corpus.labels[u]);
    if (spec.task == Task::Regress) {
      if (!corpus.mmse[u]) throw Error(ErrorKind::MissingLabel, "transcript " + corpus.ids[u] + " has no MMSE score");
      mmse.push_back(*corpus.mmse[u]);
    }
  }

  if (uses_embeddings(spec.kind)) {
    const auto X = embedding_rows(corpus, units);
    if (spec.kind == ModelKind::EmbedLogistic) {
      const std::vector<double> y(labels.begin(), labels.end());
      m.linear = linear::train_logistic(X, y, eval::get_double(p, "lambda", 0.01), seed);
    } else {
      m.linear = linear::train_lasso(X, mmse, eval::get_double(p, "alpha", 0.1), seed);
    }
    return m;
  }

  if (uses_crf(spec.kind)) {
    const auto key = base_signature(spec.kind, p, units, seed);
    std::shared_ptr<const StackedBase> stacked = cache ? cache->get<StackedBase>(key) : nullptr;
    if (!stacked) {
      StackedBase fresh;
      fresh.oof = out_of_fold_probabilities(corpus, units, spec.kind, p, seed);
      std::vector<std::string> texts;
      std::vector<int> seg_labels;
      gather_segments(corpus, units, texts, seg_labels);
      fresh.base = fit_base(spec.kind, p, texts, seg_labels, seed);
      stacked = cache ? cache->put(key, std::move(fresh))
                      : std::make_shared<const StackedBase>(std::move(fresh));
    }
    const auto& oof = stacked->oof;
    m.tfidf = stacked->base.tfidf;
    m.svm = stacked->base.svm;
    m.gbdt = stacked->base.gbdt;

    std::vector<std::vector<double>> extras;
    for (auto u : units)
      for (const auto& s : corpus.segments[u]) extras.push_back(segment_extras(s));
    m.extra_scaler = ZScore::fit(extras);

    std::vector<crf::FeatureSequence> seqs;
    std::vector<std::vector<int>> seq_labels;
    for (std::size_t i = 0; i < units.size(); ++i) {
      seqs.push_back(crf_sequence(corpus, units[i], oof[i], *m.extra_scaler));
      seq_labels.emplace_back(seqs.back().steps.size(), corpus.labels[units[i]]);
    }
    std::vector<std::string> names{"p_ad"};
    const auto extra_names = extras_names(corpus.segments[units.front()].front());
    names.insert(names.end(), extra_names.begin(), extra_names.end());
    names.push_back("bias");
    m.crf = crf::crf_train(seqs, seq_labels, crf_params(p, seed), names);
    return m;
  }

  std::string key = "doc|" + std::string(data::to_string(corpus.variant));
  for (const char* k : {"max_features", "stop_words", "analyzer", "sublinear_tf"})
    if (const auto* v = eval::find(p, k)) key += "|" + std::string(k) + "=" + eval::to_string(*v);
  key += "|units=";
  for (auto u : units) key += std::to_string(u) + ",";
  std::shared_ptr<const DocumentFit> doc = cache ? cache->get<DocumentFit>(key) : nullptr;
  if (!doc) {
    DocumentFit fresh;
    std::vector<std::string> docs;
    for (auto u : units) docs.push_back(corpus.texts[u]);
    fresh.tfidf = text::fit_tfidf(docs, tfidf_params(p));
    m.tfidf = fresh.tfidf;
    if (corpus.variant == data::Variant::PAR_TIME) {
      std::vector<std::vector<double>> rows;
      for (auto u : units) rows.push_back(aggregate_row(corpus.aggregates[u]));
      fresh.scaler = ZScore::fit(rows);
      m.extra_scaler = fresh.scaler;
    }
    fresh.X = document_features(m, corpus, units);
    doc = cache ? cache->put(key, std::move(fresh)) : std::make_shared<const DocumentFit>(std::move(fresh));
  }
  m.tfidf = doc->tfidf;
  m.extra_scaler = doc->scaler;
  const auto& X = doc->X;
  if (spec.kind == ModelKind::Svm) {
    const auto sp = svm_params(p);
    if (spec.task == Task::Classify) {
      std::vector<int> y(labels.size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = labels[i] ? 1 : -1;
      m.svm = svm::train_svc(X, y, sp, seed);
    } else {
      m.svm = svm::train_svr(X, mmse, sp, seed);
    }
  } else {
    const auto gp = gbdt_params(p, seed);
    if (spec.task == Task::Classify) {
      const std::vector<double> y(labels.begin(), labels.end());
      m.gbdt = gbdt::train_gbdt(X, y, gbdt::Loss::Logistic, gp);
    } else {
      m.gbdt = gbdt::train_gbdt(X, mmse, gbdt::Loss::Squared, gp);
    }
  }
  return m;
}

Predictions predict_pipeline(const FittedPipeline& m, const Corpus& corpus,
                             std::span<const std::size_t> units) {
  if (m.variant != corpus.variant)
    throw Error(ErrorKind::DataFormat, "model was trained on " + std::string(data::to_string(m.variant)) +
                                           " but the dataset is " + std::string(data::to_string(corpus.variant)));
  Predictions out;
  const bool classify = m.spec.task == Task::Classify;

  if (m.linear) {
    const auto v = linear::predict(*m.linear, embedding_rows(corpus, units));
    for (Eigen::Index i = 0; i < v.size(); ++i) out.scores.push_back(classify ? v(i) : clamp_mmse(v(i)));
  } else if (m.crf) {
    BaseModel base{*m.tfidf, m.svm, m.gbdt};
    for (auto u : units) {
      std::vector<std::string> texts;
      for (const auto& s : corpus.segments[u]) texts.push_back(s.text);
      const auto seq = crf_sequence(corpus, u, base_probability(base, texts), *m.extra_scaler);
      out.labels.push_back(crf::transcript_prediction(*m.crf, seq));
      out.scores.push_back(crf::forward_backward(*m.crf, seq).node.back()[crf::kAD]);
    }
    return out;
  } else {
    const auto X = document_features(m, corpus, units);
    if (m.svm) {
      if (classify) {
        out.scores = m.svm->platt ? svm::predict_proba(*m.svm, X) : svm::predict_decision(*m.svm, X);
        const auto d = svm::predict_decision(*m.svm, X);
        for (double v : d) out.labels.push_back(v > 0.0 ? 1 : 0);
        return out;
      }
      for (double v : svm::predict_svr(*m.svm, X)) out.scores.push_back(clamp_mmse(v));
    } else {
      for (double v : gbdt::predict_gbdt(*m.gbdt, X)) out.scores.push_back(classify ? v : clamp_mmse(v));
    }
  }
  if (classify)
    for (double s : out.scores) out.labels.push_back(s > 0.5 ? 1 : 0);
  return out;
}

Json to_json(const FittedPipeline& m) {
  Json j;
  j["kind"] = to_string(m.spec.kind);
  j["task"] = to_string(m.spec.task);
  j["variant"] = data::to_string(m.variant);
  j["params"] = eval::to_json(m.spec.params);
  if (m.tfidf) j["tfidf"] = text::to_json(*m.tfidf);
  if (m.svm) j["svm"] = svm::to_json(*m.svm);
  if (m.gbdt) j["gbdt"] = gbdt::to_json(*m.gbdt);
  if (m.extra_scaler) j["extra_scaler"] = {{"mean", m.extra_scaler->mean}, {"scale", m.extra_scaler->scale}};
  if (m.crf) j["crf"] = crf::to_json(*m.crf);
  if (m.linear) j["linear"] = linear::to_json(*m.linear);
  return j;
}

FittedPipeline pipeline_from_json(const Json& j) {
  try {
    FittedPipeline m;
    m.spec.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.spec.task = parse_task(j.at("task").get<std::string>());
    m.variant = data::parse_variant(j.at("variant").get<std::string>());
    m.spec.params = eval::params_from_json(j.at("params"));
    if (j.contains("tfidf")) m.tfidf = text::tfidf_from_json(j["tfidf"]);
    if (j.contains("svm")) m.svm = svm::svm_from_json(j["svm"]);
    if (j.contains("gbdt")) m.gbdt = gbdt::gbdt_from_json(j["gbdt"]);
    if (j.contains("extra_scaler"))
      m.extra_scaler = ZScore{j["extra_scaler"].at("mean").get<std::vector<double>>(),
                              j["extra_scaler"].at("scale").get<std::vector<double>>()};
    if (j.contains("crf")) m.crf = crf::crf_from_json(j["crf"]);
    if (j.contains("linear")) m.linear = linear::linear_from_json(j["linear"]);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("malformed model file: ") + e.what());
  }
}

std::vector<eval::Fold> unit_folds(const Corpus& corpus, std::span<const std::size_t> units,
                                   const eval::FoldSpec& spec) {
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (auto u : units) {
    labels.push_back(corpus.labels[u]);
    groups.push_back(corpus.ids[u]);
  }
  return eval::make_folds(labels, groups, spec);
}

std::vector<eval::FoldMetrics> cross_validate(const Corpus& corpus, std::span<const std::size_t> units,
                                              const std::vector<eval::Fold>& folds,
                                              const ModelSpec& spec, std::uint64_t seed,
                                              FitCache* cache) {
  std::vector<eval::FoldMetrics> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train, valid;
    for (auto i : folds[f].train) train.push_back(units[i]);
    for (auto i : folds[f].valid) valid.push_back(units[i]);
    const auto model = fit_pipeline(corpus, train, spec, seed + 1000003ULL * (f + 1), cache);
    const auto pred = predict_pipeline(model, corpus, valid);
    eval::FoldMetrics fm;
    fm.n_valid = valid.size();
    if (spec.task == Task::Classify) {
      std::vector<int> gold;
      for (auto u : valid) gold.push_back(corpus.labels[u]);
      fm.classification = eval::classification_metrics(eval::ConfusionMatrix::from_predictions(pred.labels, gold));
    } else {
      std::vector<double> gold;
      for (auto u : valid) gold.push_back(*corpus.mmse[u]);
      fm.rmse = eval::rmse(pred.scores, gold);
    }
    out.push_back(std::move(fm));
  }
  return out;
}

double selection_score(const eval::MetricsReport& report, Task task) {
  if (task == Task::Classify) return report.mean_classification->accuracy;
  return -*report.mean_rmse;
}

}  // namespace adscreen::pipeline
