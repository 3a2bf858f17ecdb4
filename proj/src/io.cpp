#include "adscreen/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "adscreen/error.hpp"

namespace adscreen::io {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void atomic_write_file(const std::string& path, std::string_view contents) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  fs::path temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + temp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(temp, ec);
      throw Error(ErrorKind::Io, "short write to " + temp.string());
    }
  }
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw Error(ErrorKind::Io, "cannot rename into " + path);
  }
}

Json transcript_to_json(const chat::Transcript& transcript) {
  const auto& meta = transcript.meta;
  Json record;
  record["id"] = meta.transcript_id;
  record["age"] = meta.age ? Json(*meta.age) : Json(nullptr);
  record["sex"] = chat::to_string(meta.sex);
  record["diagnosis"] = chat::to_string(meta.diagnosis);
  record["mmse"] = meta.mmse ? Json(*meta.mmse) : Json(nullptr);
  Json utterances = Json::array();
  for (const auto& u : transcript.utterances) {
    Json item;
    item["speaker"] = chat::to_string(u.speaker);
    item["text"] = u.text;
    item["start_ms"] = u.interval ? Json(u.interval->start_ms) : Json(nullptr);
    item["end_ms"] = u.interval ? Json(u.interval->end_ms) : Json(nullptr);
    utterances.push_back(std::move(item));
  }
  record["utterances"] = std::move(utterances);
  return record;
}

chat::Transcript transcript_from_json(const Json& record) {
  try {
    chat::Transcript transcript;
    auto& meta = transcript.meta;
    meta.transcript_id = record.at("id").get<std::string>();
    if (!record.at("age").is_null()) meta.age = record.at("age").get<int>();
    meta.sex = chat::parse_sex(record.at("sex").get<std::string>());
    const auto diagnosis = record.at("diagnosis").get<std::string>();
    meta.diagnosis = diagnosis == "AD" ? chat::Diagnosis::AD : chat::parse_diagnosis(diagnosis);
    if (!record.at("mmse").is_null()) meta.mmse = record.at("mmse").get<int>();
    for (const auto& item : record.at("utterances")) {
      chat::Utterance u;
      u.speaker = chat::parse_speaker(item.at("speaker").get<std::string>());
      u.text = item.at("text").get<std::string>();
      if (!item.at("start_ms").is_null() && !item.at("end_ms").is_null())
        u.interval = chat::TimeInterval{item.at("start_ms").get<std::int64_t>(),
                                        item.at("end_ms").get<std::int64_t>()};
      u.index = transcript.utterances.size();
      transcript.utterances.push_back(std::move(u));
    }
    return transcript;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad transcript record: ") + e.what());
  }
}

std::string write_transcripts_jsonl(const std::vector<chat::Transcript>& transcripts) {
  std::string out;
  for (const auto& t : transcripts) {
    out += transcript_to_json(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<chat::Transcript> read_transcripts_jsonl(std::string_view text) {
  std::vector<chat::Transcript> out;
  for (const auto& record : parse_jsonl(text)) out.push_back(transcript_from_json(record));
  return out;
}

std::vector<Json> parse_jsonl(std::string_view text) {
  std::vector<Json> records;
  std::size_t begin = 0;
  std::size_t line_no = 0;
  while (begin < text.size()) {
    auto nl = text.find('\n', begin);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(begin, nl - begin);
    ++line_no;
    begin = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      records.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::DataFormat,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace adscreen::io
