#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "adscreen/sparse.hpp"

namespace adscreen::text {

enum class Analyzer { Word, Char };
enum class StopWords { None, English };

struct TfidfParams {
  Analyzer analyzer = Analyzer::Word;
  // Defaults to (1,1) for words and (2,4) for characters; see with_default_ngrams().
  int ngram_lo = 1;
  int ngram_hi = 1;
  StopWords stop_words = StopWords::None;
  std::size_t max_features = 1000;
  bool sublinear_tf = false;

  void validate() const;
  static TfidfParams with_default_ngrams(Analyzer analyzer);
};

struct TfidfModel {
  std::map<std::string, std::uint32_t> vocabulary;  // term -> column
  std::vector<double> idf;                          // indexed by column
  TfidfParams params;

  std::size_t size() const { return idf.size(); }
  std::vector<std::string> feature_names() const;
};

// The fixed in-repo English stop-word list.
const std::unordered_set<std::string>& english_stop_words();

// Word analyzer: lowercased alphanumeric runs (bytes >= 0x80 count as
// alphanumeric so UTF-8 letters stay inside words), stop words removed, then
// n-grams joined by single spaces. Char analyzer: code-point n-grams over the
// lowercased text with whitespace runs collapsed to one space.
std::vector<std::string> analyze(std::string_view document, const TfidfParams& params);

// Vocabulary keeps the max_features most frequent terms (corpus-wide counts,
// ties broken lexicographically); columns are assigned in lexicographic term
// order. idf(t) = ln((1 + N) / (1 + df(t))) + 1.
TfidfModel fit_tfidf(const std::vector<std::string>& corpus, const TfidfParams& params);

// tf is the raw count, or 1 + ln(count) when sublinear; each row is scaled to
// unit L2 norm and rows without vocabulary terms stay zero.
SparseMatrix transform_tfidf(const TfidfModel& model, const std::vector<std::string>& docs);

nlohmann::ordered_json to_json(const TfidfModel& model);
TfidfModel tfidf_from_json(const nlohmann::ordered_json& j);

std::string_view to_string(Analyzer analyzer);
std::string_view to_string(StopWords stop_words);
Analyzer parse_analyzer(std::string_view s);
StopWords parse_stop_words(std::string_view s);

}  // namespace adscreen::text
