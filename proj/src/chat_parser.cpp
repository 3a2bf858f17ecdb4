#include "adscreen/chat_parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adscreen/error.hpp"

namespace adscreen::chat {

namespace {

constexpr std::string_view kNakDelimiter = "\x15";
constexpr std::string_view kBulletDelimiter = "\xE2\x80\xA2";  // U+2022

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\v\f");
  return s.substr(first, last - first + 1);
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::size_t delimiter_at(std::string_view s, std::size_t pos) {
  if (s.compare(pos, kNakDelimiter.size(), kNakDelimiter) == 0) return kNakDelimiter.size();
  if (s.compare(pos, kBulletDelimiter.size(), kBulletDelimiter) == 0)
    return kBulletDelimiter.size();
  return 0;
}

std::optional<std::int64_t> parse_digits(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Matches `<delim>start_end<delim>` at pos; returns the span length or 0.
std::size_t match_time_code(std::string_view s, std::size_t pos, TimeInterval& out) {
  const std::size_t open = delimiter_at(s, pos);
  if (open == 0) return 0;
  std::size_t i = pos + open;
  const std::size_t start_begin = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == start_begin || i >= s.size() || s[i] != '_') return 0;
  const std::size_t start_end = i;
  ++i;
  const std::size_t end_begin = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == end_begin) return 0;
  const std::size_t close = delimiter_at(s, i);
  if (close == 0) return 0;
  const auto start = parse_digits(s.substr(start_begin, start_end - start_begin));
  const auto end = parse_digits(s.substr(end_begin, i - end_begin));
  if (!start || !end) return 0;
  out = TimeInterval{*start, *end};
  return i + close - pos;
}

std::optional<int> parse_bounded_int(std::string_view text, int lo, int hi) {
  const auto value = parse_digits(text);
  if (!value || *value < lo || *value > hi) return std::nullopt;
  return static_cast<int>(*value);
}

std::vector<std::string_view> split_pipes(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    const auto bar = s.find('|', begin);
    if (bar == std::string_view::npos) {
      out.push_back(s.substr(begin));
      break;
    }
    out.push_back(s.substr(begin, bar - begin));
    begin = bar + 1;
  }
  return out;
}

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

}  // namespace

std::string_view to_string(Sex sex) {
  switch (sex) {
    case Sex::Male: return "male";
    case Sex::Female: return "female";
    case Sex::Unknown: break;
  }
  return "unknown";
}

std::string_view to_string(Diagnosis diagnosis) {
  switch (diagnosis) {
    case Diagnosis::AD: return "AD";
    case Diagnosis::Control: return "Control";
    case Diagnosis::Unknown: break;
  }
  return "Unknown";
}

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::PAR ? "PAR" : "INV";
}

Sex parse_sex(std::string_view text) {
  const auto s = lower(trim(text));
  if (s == "male") return Sex::Male;
  if (s == "female") return Sex::Female;
  return Sex::Unknown;
}

Diagnosis parse_diagnosis(std::string_view text) {
  const auto s = lower(trim(text));
  if (s == "probablead") return Diagnosis::AD;
  if (s == "control") return Diagnosis::Control;
  return Diagnosis::Unknown;
}

Speaker parse_speaker(std::string_view text) {
  if (text == "PAR") return Speaker::PAR;
  if (text == "INV") return Speaker::INV;
  throw Error(ErrorKind::DataFormat, "unknown speaker '" + std::string(text) + "'");
}

std::size_t Transcript::participant_count() const {
  return static_cast<std::size_t>(std::count_if(
      utterances.begin(), utterances.end(),
      [](const Utterance& u) { return u.speaker == Speaker::PAR; }));
}

IdFieldLayout IdFieldLayout::parse(std::string_view spec) {
  IdFieldLayout layout;
  spec = trim(spec);
  if (spec.empty() || spec == "default") return layout;
  std::size_t begin = 0;
  while (begin <= spec.size()) {
    auto comma = spec.find(',', begin);
    if (comma == std::string_view::npos) comma = spec.size();
    const auto item = trim(spec.substr(begin, comma - begin));
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::Config, "id layout entry '" + std::string(item) + "' is not key=slot");
    const auto key = trim(item.substr(0, eq));
    const auto slot = parse_digits(trim(item.substr(eq + 1)));
    if (!slot || *slot < 0)
      throw Error(ErrorKind::Config, "id layout slot for '" + std::string(key) + "' is not an index");
    const auto index = static_cast<std::size_t>(*slot);
    if (key == "speaker") layout.speaker = index;
    else if (key == "age") layout.age = index;
    else if (key == "sex") layout.sex = index;
    else if (key == "group") layout.group = index;
    else if (key == "mmse") layout.mmse = index;
    else throw Error(ErrorKind::Config, "unknown id layout key '" + std::string(key) + "'");
    begin = comma + 1;
  }
  return layout;
}

CleanedText clean_utterance(std::string_view raw) {
  CleanedText result;

  // Pass 1: cut time codes, leaving a space in their place.
  std::string stripped;
  stripped.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    TimeInterval interval;
    if (const auto len = match_time_code(raw, i, interval); len > 0) {
      result.interval = interval;
      stripped.push_back(' ');
      i += len;
    } else {
      stripped.push_back(raw[i]);
      ++i;
    }
  }

  // Pass 2: drop bracket characters and stray delimiters, collapse whitespace.
  std::string& out = result.text;
  out.reserve(stripped.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < stripped.size();) {
    if (const auto len = delimiter_at(stripped, i); len > 0) {
      i += len;
      continue;
    }
    const char c = stripped[i++];
    if (c == '[' || c == ']' || c == '<' || c == '>') continue;
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return result;
}

IdHeaderFields parse_id_header(std::string_view line, const IdFieldLayout& layout,
                               std::vector<std::string>* warnings) {
  IdHeaderFields fields;
  line = trim(line);
  if (line.rfind("@ID:", 0) != 0) return fields;
  const auto slots = split_pipes(trim(line.substr(4)));
  const auto slot = [&](std::size_t index) -> std::string_view {
    return index < slots.size() ? trim(slots[index]) : std::string_view{};
  };

  if (slot(layout.speaker) != "PAR") return fields;
  fields.is_participant = true;

  if (const auto age_text = slot(layout.age); !age_text.empty()) {
    const auto years = age_text.substr(0, age_text.find(';'));
    fields.age = parse_bounded_int(trim(years), 1, 120);
    if (!fields.age) warn(warnings, "UnparseableAge: '" + std::string(age_text) + "'");
  }
  fields.sex = parse_sex(slot(layout.sex));
  fields.diagnosis = parse_diagnosis(slot(layout.group));
  if (const auto mmse_text = slot(layout.mmse); !mmse_text.empty()) {
    fields.mmse = parse_bounded_int(mmse_text, 0, 30);
    if (!fields.mmse) warn(warnings, "UnparseableMmse: '" + std::string(mmse_text) + "'");
  }
  return fields;
}

Transcript parse_transcript(std::string_view raw, std::string_view transcript_id,
                            const ParseOptions& options, std::vector<std::string>* warnings) {
  // Fold continuation lines (leading tab) into the line they continue.
  std::vector<std::string> lines;
  std::size_t begin = 0;
  while (begin < raw.size()) {
    auto nl = raw.find('\n', begin);
    if (nl == std::string_view::npos) nl = raw.size();
    std::string_view line = raw.substr(begin, nl - begin);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() == '\t' && !lines.empty()) {
      lines.back().push_back(' ');
      lines.back().append(trim(line));
    } else {
      lines.emplace_back(line);
    }
    begin = nl + 1;
  }

  Transcript transcript;
  transcript.meta.transcript_id = std::string(transcript_id);
  bool saw_begin = false;
  bool saw_end = false;
  const std::string id_prefix = std::string(transcript_id) + ": ";

  for (const auto& line : lines) {
    if (line.empty()) continue;
    if (line.front() == '@') {
      const auto header = trim(line);
      if (header == "@Begin") saw_begin = true;
      else if (header == "@End") saw_end = true;
      else if (header.rfind("@ID:", 0) == 0) {
        const auto fields = parse_id_header(header, options.layout, warnings);
        if (fields.is_participant) {
          transcript.meta.age = fields.age;
          transcript.meta.sex = fields.sex;
          transcript.meta.diagnosis = fields.diagnosis;
          transcript.meta.mmse = fields.mmse;
        }
      }
      continue;
    }
    if (line.front() != '*') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const auto code = std::string_view(line).substr(1, colon - 1);
    if (code != "PAR" && code != "INV") continue;

    auto cleaned = clean_utterance(std::string_view(line).substr(colon + 1));
    if (cleaned.text.empty()) {
      warn(warnings, id_prefix + "dropped empty utterance on *" + std::string(code) + " tier");
      continue;
    }
    if (cleaned.interval && cleaned.interval->end_ms < cleaned.interval->start_ms) {
      warn(warnings, id_prefix + "ignored reversed time code");
      cleaned.interval.reset();
    }
    Utterance utterance;
    utterance.speaker = parse_speaker(code);
    utterance.text = std::move(cleaned.text);
    utterance.interval = cleaned.interval;
    utterance.index = transcript.utterances.size();
    transcript.utterances.push_back(std::move(utterance));
  }

  if (!saw_begin || !saw_end) {
    const std::string message = id_prefix + "missing @Begin/@End envelope";
    if (options.strict_envelope) throw Error(ErrorKind::MalformedHeader, message);
    warn(warnings, "MalformedHeader: " + message);
  }
  if (transcript.participant_count() == 0)
    throw Error(ErrorKind::NoParticipantSpeech, id_prefix + "no *PAR: tiers");
  return transcript;
}

Transcript parse_file(const std::string& path, const ParseOptions& options,
                      std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto stem = std::filesystem::path(path).stem().string();
  return parse_transcript(buffer.str(), stem, options, warnings);
}

}  // namespace adscreen::chat
