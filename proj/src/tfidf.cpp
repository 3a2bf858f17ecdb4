#include "adscreen/tfidf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "adscreen/error.hpp"

namespace adscreen::text {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

char ascii_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::vector<std::string> word_tokens(std::string_view doc, bool drop_stop_words) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (current.empty()) return;
    if (!drop_stop_words || !english_stop_words().contains(current))
      tokens.push_back(current);
    current.clear();
  };
  for (char c : doc) {
    if (is_word_byte(static_cast<unsigned char>(c))) {
      current.push_back(ascii_lower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> char_ngrams(std::string_view doc, int lo, int hi) {
  std::string normalized;
  bool space = false;
  for (char c : doc) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !normalized.empty()) normalized.push_back(' ');
    space = false;
    normalized.push_back(ascii_lower(c));
  }
  // Code-point start offsets, plus the end sentinel.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    if ((static_cast<unsigned char>(normalized[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  const std::size_t n_points = starts.size();
  starts.push_back(normalized.size());

  std::vector<std::string> grams;
  for (int n = lo; n <= hi; ++n) {
    const auto width = static_cast<std::size_t>(n);
    if (width > n_points) break;
    for (std::size_t i = 0; i + width <= n_points; ++i)
      grams.push_back(normalized.substr(starts[i], starts[i + width] - starts[i]));
  }
  return grams;
}

}  // namespace

void TfidfParams::validate() const {
  if (ngram_lo < 1 || ngram_hi < ngram_lo)
    throw Error(ErrorKind::Config, "ngram range must satisfy 1 <= lo <= hi");
  if (max_features == 0) throw Error(ErrorKind::Config, "max_features must be positive");
}

TfidfParams TfidfParams::with_default_ngrams(Analyzer analyzer) {
  TfidfParams p;
  p.analyzer = analyzer;
  if (analyzer == Analyzer::Char) {
    p.ngram_lo = 2;
    p.ngram_hi = 4;
  }
  return p;
}

std::vector<std::string> TfidfModel::feature_names() const {
  std::vector<std::string> names(vocabulary.size());
  for (const auto& [term, column] : vocabulary) names[column] = term;
  return names;
}

std::vector<std::string> analyze(std::string_view document, const TfidfParams& params) {
  if (params.analyzer == Analyzer::Char)
    return char_ngrams(document, params.ngram_lo, params.ngram_hi);

  const auto tokens = word_tokens(document, params.stop_words == StopWords::English);
  if (params.ngram_lo == 1 && params.ngram_hi == 1) return tokens;
  std::vector<std::string> grams;
  for (int n = params.ngram_lo; n <= params.ngram_hi; ++n) {
    const auto width = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (std::size_t k = 1; k < width; ++k) gram += ' ' + tokens[i + k];
      grams.push_back(std::move(gram));
    }
  }
  return grams;
}

TfidfModel fit_tfidf(const std::vector<std::string>& corpus, const TfidfParams& params) {
  params.validate();
  if (corpus.empty()) throw Error(ErrorKind::EmptyVocabulary, "cannot fit TF-IDF on an empty corpus");

  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> stats;  // count, df
  for (const auto& doc : corpus) {
    std::unordered_map<std::string, std::size_t> seen;
    for (auto& term : analyze(doc, params)) ++seen[std::move(term)];
    for (const auto& [term, count] : seen) {
      auto& s = stats[term];
      s.first += count;
      s.second += 1;
    }
  }
  if (stats.empty())
    throw Error(ErrorKind::EmptyVocabulary, "every token was filtered out of the corpus");

  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(stats.begin(),
                                                                                  stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  if (ranked.size() > params.max_features) ranked.resize(params.max_features);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  TfidfModel model;
  model.params = params;
  model.idf.reserve(ranked.size());
  const double n_docs = static_cast<double>(corpus.size());
  for (const auto& [term, s] : ranked) {
    model.vocabulary.emplace(term, static_cast<std::uint32_t>(model.idf.size()));
    model.idf.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(s.second))) + 1.0);
  }
  return model;
}

SparseMatrix transform_tfidf(const TfidfModel& model, const std::vector<std::string>& docs) {
  SparseMatrix out(model.size());
  std::vector<std::pair<std::uint32_t, double>> entries;
  for (const auto& doc : docs) {
    std::unordered_map<std::uint32_t, std::size_t> counts;
    for (const auto& term : analyze(doc, model.params)) {
      const auto it = model.vocabulary.find(term);
      if (it != model.vocabulary.end()) ++counts[it->second];
    }
    entries.clear();
    double norm_sq = 0.0;
    for (const auto& [column, count] : counts) {
      const double c = static_cast<double>(count);
      const double tf = model.params.sublinear_tf ? 1.0 + std::log(c) : c;
      const double value = tf * model.idf[column];
      entries.emplace_back(column, value);
      norm_sq += value * value;
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (auto& e : entries) e.second *= inv;
    }
    out.push_unsorted_row(std::move(entries));
    entries = {};
  }
  return out;
}

std::string_view to_string(Analyzer analyzer) {
  return analyzer == Analyzer::Word ? "word" : "char";
}

std::string_view to_string(StopWords stop_words) {
  return stop_words == StopWords::English ? "english" : "none";
}

Analyzer parse_analyzer(std::string_view s) {
  if (s == "word") return Analyzer::Word;
  if (s == "char") return Analyzer::Char;
  throw Error(ErrorKind::Config, "analyzer must be word or char, got '" + std::string(s) + "'");
}

StopWords parse_stop_words(std::string_view s) {
  if (s == "english") return StopWords::English;
  if (s == "none" || s == "None" || s.empty()) return StopWords::None;
  throw Error(ErrorKind::Config, "stop_words must be english or none, got '" + std::string(s) + "'");
}

nlohmann::ordered_json to_json(const TfidfModel& model) {
  nlohmann::ordered_json j;
  j["params"] = {{"analyzer", to_string(model.params.analyzer)},
                 {"ngram_range", {model.params.ngram_lo, model.params.ngram_hi}},
                 {"stop_words", to_string(model.params.stop_words)},
                 {"max_features", model.params.max_features},
                 {"sublinear_tf", model.params.sublinear_tf}};
  j["vocabulary"] = model.feature_names();
  j["idf"] = model.idf;
  return j;
}

TfidfModel tfidf_from_json(const nlohmann::ordered_json& j) {
  try {
    TfidfModel model;
    const auto& p = j.at("params");
    model.params.analyzer = parse_analyzer(p.at("analyzer").get<std::string>());
    model.params.ngram_lo = p.at("ngram_range").at(0).get<int>();
    model.params.ngram_hi = p.at("ngram_range").at(1).get<int>();
    model.params.stop_words = parse_stop_words(p.at("stop_words").get<std::string>());
    model.params.max_features = p.at("max_features").get<std::size_t>();
    model.params.sublinear_tf = p.at("sublinear_tf").get<bool>();
    const auto terms = j.at("vocabulary").get<std::vector<std::string>>();
    model.idf = j.at("idf").get<std::vector<double>>();
    if (terms.size() != model.idf.size())
      throw Error(ErrorKind::DataFormat, "TF-IDF vocabulary and idf lengths differ");
    for (std::size_t i = 0; i < terms.size(); ++i)
      model.vocabulary.emplace(terms[i], static_cast<std::uint32_t>(i));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad TF-IDF model: ") + e.what());
  }
}

}  // namespace adscreen::text
