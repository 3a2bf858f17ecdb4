#include "adscreen/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "adscreen/error.hpp"

namespace adscreen::data {

namespace {

std::optional<Label> label_of(const chat::Transcript& t, std::vector<std::string>* warnings) {
  switch (t.meta.diagnosis) {
    case chat::Diagnosis::AD: return Label::AD;
    case chat::Diagnosis::Control: return Label::Control;
    case chat::Diagnosis::Unknown: break;
  }
  if (warnings)
    warnings->push_back("MissingLabel: " + t.meta.transcript_id + " skipped (diagnosis unknown)");
  return std::nullopt;
}

io::Json optional_int(const std::optional<int>& v) { return v ? io::Json(*v) : io::Json(nullptr); }

std::optional<int> read_optional_int(const io::Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<int>();
}

std::string_view label_name(Label label) { return label == Label::AD ? "AD" : "Control"; }

Label parse_label(const std::string& s) {
  if (s == "AD") return Label::AD;
  if (s == "Control") return Label::Control;
  throw Error(ErrorKind::DataFormat, "unknown label '" + s + "'");
}

}  // namespace

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::PAR: return "PAR";
    case Variant::PAR_INV: return "PAR_INV";
    case Variant::PAR_TIME: return "PAR_TIME";
    case Variant::PAR_SPLT: return "PAR_SPLT";
    case Variant::PAR_SPLT_T: return "PAR_SPLT_T";
    case Variant::PAR_SPLT_T_D: return "PAR_SPLT_T_D";
  }
  return "PAR";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::PAR, Variant::PAR_INV, Variant::PAR_TIME, Variant::PAR_SPLT,
                 Variant::PAR_SPLT_T, Variant::PAR_SPLT_T_D}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorKind::Config, "unknown dataset variant '" + std::string(name) + "'");
}

bool is_utterance_level(Variant variant) {
  return variant == Variant::PAR_SPLT || variant == Variant::PAR_SPLT_T ||
         variant == Variant::PAR_SPLT_T_D;
}

std::optional<TimeAggregates> time_aggregates(const chat::Transcript& transcript) {
  std::vector<double> durations;
  std::vector<double> gaps;
  std::optional<std::int64_t> prev_end;
  for (const auto& u : transcript.utterances) {
    if (u.speaker != chat::Speaker::PAR || !u.interval) continue;
    durations.push_back(static_cast<double>(u.interval->end_ms - u.interval->start_ms));
    if (prev_end) gaps.push_back(static_cast<double>(u.interval->start_ms - *prev_end));
    prev_end = u.interval->end_ms;
  }
  if (durations.empty()) return std::nullopt;

  TimeAggregates agg;
  agg.mean_dur_ms = std::accumulate(durations.begin(), durations.end(), 0.0) /
                    static_cast<double>(durations.size());
  auto sorted = durations;
  std::sort(sorted.begin(), sorted.end());
  agg.min_dur_ms = sorted.front();
  agg.max_dur_ms = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  agg.median_dur_ms = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  if (!gaps.empty())
    agg.mean_gap_ms =
        std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  return agg;
}

std::vector<DocumentRecord> build_transcript_dataset(
    const std::vector<chat::Transcript>& transcripts, bool include_interviewer,
    bool include_time_aggregates, std::vector<std::string>* warnings) {
  std::vector<DocumentRecord> records;
  records.reserve(transcripts.size());
  for (const auto& t : transcripts) {
    const auto label = label_of(t, warnings);
    if (!label) continue;
    DocumentRecord record;
    record.transcript_id = t.meta.transcript_id;
    record.label = *label;
    record.mmse = t.meta.mmse;
    for (const auto& u : t.utterances) {
      if (u.speaker == chat::Speaker::INV && !include_interviewer) continue;
      if (!record.text.empty()) record.text.push_back(' ');
      record.text += u.text;
    }
    if (include_time_aggregates) {
      record.aggregates = time_aggregates(t);
      if (!record.aggregates) {
        if (warnings)
          warnings->push_back(t.meta.transcript_id + ": no time codes, aggregates imputed as 0");
        record.aggregates = TimeAggregates{};
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<SegmentRecord> build_utterance_dataset(
    const std::vector<chat::Transcript>& transcripts, bool with_temporal,
    bool with_demographics, std::vector<std::string>* warnings) {
  std::vector<SegmentRecord> records;
  for (const auto& t : transcripts) {
    const auto label = label_of(t, warnings);
    if (!label) continue;

    std::optional<Demographics> demographics;
    if (with_demographics) {
      if (!t.meta.age || t.meta.sex == chat::Sex::Unknown) {
        if (warnings)
          warnings->push_back(t.meta.transcript_id +
                              ": age or sex unknown, excluded from demographic variant");
        continue;
      }
      demographics = Demographics{static_cast<double>(*t.meta.age),
                                  t.meta.sex == chat::Sex::Female ? 1.0 : 0.0};
    }

    const auto aggregates = time_aggregates(t).value_or(TimeAggregates{});
    std::optional<std::int64_t> prev_end;
    for (const auto& u : t.utterances) {
      if (u.speaker != chat::Speaker::PAR) continue;
      SegmentRecord record;
      record.transcript_id = t.meta.transcript_id;
      record.utterance_index = u.index;
      record.text = u.text;
      record.label = *label;
      record.mmse = t.meta.mmse;
      record.demographics = demographics;
      if (with_temporal) {
        TemporalFeatures temporal;
        temporal.mean_dur_ms = aggregates.mean_dur_ms;
        temporal.max_dur_ms = aggregates.max_dur_ms;
        temporal.min_dur_ms = aggregates.min_dur_ms;
        if (u.interval) {
          temporal.duration_ms = static_cast<double>(u.interval->end_ms - u.interval->start_ms);
          temporal.gap_before_ms =
              prev_end ? static_cast<double>(u.interval->start_ms - *prev_end) : 0.0;
        } else {
          temporal.missing = true;
        }
        record.temporal = temporal;
      }
      if (u.interval) prev_end = u.interval->end_ms;
      records.push_back(std::move(record));
    }
  }
  return records;
}

Dataset build_variant(const std::vector<chat::Transcript>& transcripts, Variant variant,
                      std::vector<std::string>* warnings) {
  Dataset dataset;
  dataset.variant = variant;
  switch (variant) {
    case Variant::PAR:
      dataset.documents = build_transcript_dataset(transcripts, false, false, warnings);
      break;
    case Variant::PAR_INV:
      dataset.documents = build_transcript_dataset(transcripts, true, false, warnings);
      break;
    case Variant::PAR_TIME:
      dataset.documents = build_transcript_dataset(transcripts, false, true, warnings);
      break;
    case Variant::PAR_SPLT:
      dataset.segments = build_utterance_dataset(transcripts, false, false, warnings);
      break;
    case Variant::PAR_SPLT_T:
      dataset.segments = build_utterance_dataset(transcripts, true, false, warnings);
      break;
    case Variant::PAR_SPLT_T_D:
      dataset.segments = build_utterance_dataset(transcripts, true, true, warnings);
      break;
  }
  return dataset;
}

std::string write_dataset_jsonl(const Dataset& dataset) {
  std::string out;
  io::Json header;
  header["variant"] = to_string(dataset.variant);
  header["rows"] = is_utterance_level(dataset.variant) ? dataset.segments.size()
                                                       : dataset.documents.size();
  out += header.dump() + '\n';

  for (const auto& d : dataset.documents) {
    io::Json r;
    r["transcript_id"] = d.transcript_id;
    r["text"] = d.text;
    r["label"] = label_name(d.label);
    r["mmse"] = optional_int(d.mmse);
    if (d.aggregates) {
      r["aggregates"] = {{"mean_dur_ms", d.aggregates->mean_dur_ms},
                         {"min_dur_ms", d.aggregates->min_dur_ms},
                         {"max_dur_ms", d.aggregates->max_dur_ms},
                         {"median_dur_ms", d.aggregates->median_dur_ms},
                         {"mean_gap_ms", d.aggregates->mean_gap_ms}};
    }
    out += r.dump() + '\n';
  }
  for (const auto& s : dataset.segments) {
    io::Json r;
    r["transcript_id"] = s.transcript_id;
    r["utterance_index"] = s.utterance_index;
    r["text"] = s.text;
    r["label"] = label_name(s.label);
    r["mmse"] = optional_int(s.mmse);
    if (s.temporal) {
      r["temporal"] = {{"duration_ms", s.temporal->duration_ms},
                       {"gap_before_ms", s.temporal->gap_before_ms},
                       {"mean_dur_ms", s.temporal->mean_dur_ms},
                       {"max_dur_ms", s.temporal->max_dur_ms},
                       {"min_dur_ms", s.temporal->min_dur_ms},
                       {"missing", s.temporal->missing}};
    }
    if (s.demographics) {
      r["demographics"] = {{"age_years", s.demographics->age_years},
                           {"sex_indicator", s.demographics->sex_indicator}};
    }
    out += r.dump() + '\n';
  }
  return out;
}

Dataset read_dataset_jsonl(std::string_view text) {
  const auto records = io::parse_jsonl(text);
  if (records.empty() || !records.front().contains("variant"))
    throw Error(ErrorKind::DataFormat, "dataset file lacks a variant header record");
  Dataset dataset;
  try {
    dataset.variant = parse_variant(records.front().at("variant").get<std::string>());
    const bool segments = is_utterance_level(dataset.variant);
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto& r = records[i];
      if (segments) {
        SegmentRecord s;
        s.transcript_id = r.at("transcript_id").get<std::string>();
        s.utterance_index = r.at("utterance_index").get<std::size_t>();
        s.text = r.at("text").get<std::string>();
        s.label = parse_label(r.at("label").get<std::string>());
        s.mmse = read_optional_int(r, "mmse");
        if (r.contains("temporal")) {
          const auto& t = r.at("temporal");
          s.temporal = TemporalFeatures{t.at("duration_ms").get<double>(),
                                        t.at("gap_before_ms").get<double>(),
                                        t.at("mean_dur_ms").get<double>(),
                                        t.at("max_dur_ms").get<double>(),
                                        t.at("min_dur_ms").get<double>(),
                                        t.at("missing").get<bool>()};
        }
        if (r.contains("demographics")) {
          const auto& d = r.at("demographics");
          s.demographics =
              Demographics{d.at("age_years").get<double>(), d.at("sex_indicator").get<double>()};
        }
        dataset.segments.push_back(std::move(s));
      } else {
        DocumentRecord d;
        d.transcript_id = r.at("transcript_id").get<std::string>();
        d.text = r.at("text").get<std::string>();
        d.label = parse_label(r.at("label").get<std::string>());
        d.mmse = read_optional_int(r, "mmse");
        if (r.contains("aggregates")) {
          const auto& a = r.at("aggregates");
          d.aggregates = TimeAggregates{a.at("mean_dur_ms").get<double>(),
                                        a.at("min_dur_ms").get<double>(),
                                        a.at("max_dur_ms").get<double>(),
                                        a.at("median_dur_ms").get<double>(),
                                        a.at("mean_gap_ms").get<double>()};
        }
        dataset.documents.push_back(std::move(d));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad dataset record: ") + e.what());
  }
  return dataset;
}

}  // namespace adscreen::data
