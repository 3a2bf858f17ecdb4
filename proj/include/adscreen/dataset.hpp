#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adscreen/chat_parser.hpp"
#include "adscreen/io.hpp"

namespace adscreen::data {

enum class Label { Control = 0, AD = 1 };

enum class Variant { PAR, PAR_INV, PAR_TIME, PAR_SPLT, PAR_SPLT_T, PAR_SPLT_T_D };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);
bool is_utterance_level(Variant variant);

struct TimeAggregates {
  double mean_dur_ms = 0.0;
  double min_dur_ms = 0.0;
  double max_dur_ms = 0.0;
  double median_dur_ms = 0.0;
  double mean_gap_ms = 0.0;
};

struct TemporalFeatures {
  double duration_ms = 0.0;
  double gap_before_ms = 0.0;
  double mean_dur_ms = 0.0;
  double max_dur_ms = 0.0;
  double min_dur_ms = 0.0;
  // 1 when this utterance had no time code and the values above are imputed.
  bool missing = false;
};

struct Demographics {
  double age_years = 0.0;
  double sex_indicator = 0.0;  // male 0, female 1
};

struct DocumentRecord {
  std::string transcript_id;
  std::string text;
  Label label = Label::Control;
  std::optional<int> mmse;
  std::optional<TimeAggregates> aggregates;
};

struct SegmentRecord {
  std::string transcript_id;
  std::size_t utterance_index = 0;
  std::string text;
  Label label = Label::Control;
  std::optional<int> mmse;
  std::optional<TemporalFeatures> temporal;
  std::optional<Demographics> demographics;
};

std::vector<DocumentRecord> build_transcript_dataset(
    const std::vector<chat::Transcript>& transcripts, bool include_interviewer,
    bool include_time_aggregates, std::vector<std::string>* warnings = nullptr);

// One record per PAR utterance, ordered by transcript then utterance.
std::vector<SegmentRecord> build_utterance_dataset(
    const std::vector<chat::Transcript>& transcripts, bool with_temporal,
    bool with_demographics, std::vector<std::string>* warnings = nullptr);

// Aggregates over the PAR utterances that carry a time code.
std::optional<TimeAggregates> time_aggregates(const chat::Transcript& transcript);

struct Dataset {
  Variant variant = Variant::PAR;
  std::vector<DocumentRecord> documents;  // transcript-level variants
  std::vector<SegmentRecord> segments;    // utterance-level variants
};

Dataset build_variant(const std::vector<chat::Transcript>& transcripts, Variant variant,
                      std::vector<std::string>* warnings = nullptr);

// JSON-lines file: a {"variant": ...} header record, then one record per row.
std::string write_dataset_jsonl(const Dataset& dataset);
Dataset read_dataset_jsonl(std::string_view text);

}  // namespace adscreen::data
