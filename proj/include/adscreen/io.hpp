#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adscreen/chat_parser.hpp"

namespace adscreen::io {

using Json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path);

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a partially written file. Parent directories are created.
void atomic_write_file(const std::string& path, std::string_view contents);

// One JSON object per line with keys id, age, sex, diagnosis, mmse,
// utterances[{speaker, text, start_ms, end_ms}]. Missing values are null.
Json transcript_to_json(const chat::Transcript& transcript);
chat::Transcript transcript_from_json(const Json& record);

std::string write_transcripts_jsonl(const std::vector<chat::Transcript>& transcripts);
std::vector<chat::Transcript> read_transcripts_jsonl(std::string_view text);

// Splits JSON-lines text; blank lines are skipped.
std::vector<Json> parse_jsonl(std::string_view text);

}  // namespace adscreen::io
