#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adscreen::chat {

enum class Sex { Male, Female, Unknown };
enum class Diagnosis { AD, Control, Unknown };
enum class Speaker { PAR, INV };

std::string_view to_string(Sex sex);
std::string_view to_string(Diagnosis diagnosis);
std::string_view to_string(Speaker speaker);
Sex parse_sex(std::string_view text);
Diagnosis parse_diagnosis(std::string_view text);
Speaker parse_speaker(std::string_view text);

struct TimeInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

struct TranscriptMeta {
  std::string transcript_id;
  std::optional<int> age;
  Sex sex = Sex::Unknown;
  Diagnosis diagnosis = Diagnosis::Unknown;
  std::optional<int> mmse;
};

struct Utterance {
  Speaker speaker = Speaker::PAR;
  std::string text;
  std::optional<TimeInterval> interval;
  std::size_t index = 0;
};

struct Transcript {
  TranscriptMeta meta;
  std::vector<Utterance> utterances;

  std::size_t participant_count() const;
};

// Pipe-separated slot positions inside an `@ID:` header line.
struct IdFieldLayout {
  std::size_t speaker = 2;
  std::size_t age = 3;
  std::size_t sex = 4;
  std::size_t group = 5;
  std::size_t mmse = 8;

  // "default" or a comma list such as "speaker=2,age=3,sex=4,group=5,mmse=8".
  // Keys left out keep their default slot.
  static IdFieldLayout parse(std::string_view spec);
};

struct ParseOptions {
  IdFieldLayout layout;
  // When false a missing @Begin/@End envelope is recorded as a warning
  // instead of raising MalformedHeader.
  bool strict_envelope = true;
};

struct CleanedText {
  std::string text;
  std::optional<TimeInterval> interval;
};

// Strips time-alignment suffixes (the last one becomes the interval), deletes
// '[' ']' '<' '>', collapses whitespace. Discourse markers such as "um",
// "&=laughs", "+..." and "(...)" pass through unchanged.
CleanedText clean_utterance(std::string_view raw_tier_text);

// Fields recovered from one `@ID:` line. Only the participant row fills in
// metadata; other rows return is_participant == false.
struct IdHeaderFields {
  bool is_participant = false;
  std::optional<int> age;
  Sex sex = Sex::Unknown;
  Diagnosis diagnosis = Diagnosis::Unknown;
  std::optional<int> mmse;
};

IdHeaderFields parse_id_header(std::string_view line, const IdFieldLayout& layout,
                               std::vector<std::string>* warnings = nullptr);

Transcript parse_transcript(std::string_view raw, std::string_view transcript_id,
                            const ParseOptions& options = {},
                            std::vector<std::string>* warnings = nullptr);

// Reads a `.cha` file; the transcript id is the file stem.
Transcript parse_file(const std::string& path, const ParseOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);

}  // namespace adscreen::chat
