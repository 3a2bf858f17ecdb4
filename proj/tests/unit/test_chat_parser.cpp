#include <doctest.h>

#include <filesystem>
#include <string>

#include "adscreen/chat_parser.hpp"
#include "adscreen/error.hpp"
#include "adscreen/io.hpp"
#include "adscreen/rng.hpp"

using namespace adscreen;
using namespace adscreen::chat;

namespace {

std::string fixture(const std::string& name) {
  return std::string(ADSCREEN_FIXTURE_DIR) + "/" + name;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an adscreen::Error");
  return ErrorKind::Invariant;
}

}  // namespace

TEST_CASE("clean_utterance strips time codes and keeps markers") {
  const auto a = clean_utterance("well um the water (...) overflows . \x15" "1200_5300\x15");
  CHECK(a.text == "well um the water (...) overflows .");
  REQUIRE(a.interval);
  CHECK(a.interval->start_ms == 1200);
  CHECK(a.interval->end_ms == 5300);

  const auto b = clean_utterance("ok .");
  CHECK(b.text == "ok .");
  CHECK_FALSE(b.interval);

  CHECK(clean_utterance("  a\t b  ").text == "a b");
}

TEST_CASE("clean_utterance removes brackets around retracings") {
  const auto c = clean_utterance("and then <the stool> [//] the chair \xE2\x80\xA2" "1500_4200\xE2\x80\xA2");
  CHECK(c.text == "and then the stool // the chair");
  REQUIRE(c.interval);
  CHECK(*c.interval == TimeInterval{1500, 4200});
}

TEST_CASE("clean_utterance returns the last time code") {
  const auto c = clean_utterance("a \x15" "1_2\x15 b \x15" "3_4\x15");
  CHECK(c.text == "a b");
  CHECK(*c.interval == TimeInterval{3, 4});
}

TEST_CASE("clean_utterance preserves parenthesised completions and pause codes") {
  const auto c = clean_utterance("(be)cause &-uh &=laughs +... (..)");
  CHECK(c.text == "(be)cause &-uh &=laughs +... (..)");
}

TEST_CASE("clean_utterance is idempotent and never emits forbidden characters") {
  const char* pieces[] = {"um", "&=laughs", "+...", "(...)", "[//]", "<the", "boy>", " ", "\t",
                          "\n", "\x15", "\x15" "10_20\x15", "\xE2\x80\xA2", "(be)cause", "[",
                          "]", "<", ">", "12_34", "_", "a", ".", "\xE2\x80\xA2" "5_9\xE2\x80\xA2"};
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const auto len = rng.below(12);
    for (std::uint64_t i = 0; i < len; ++i) s += pieces[rng.below(std::size(pieces))];
    const auto once = clean_utterance(s).text;
    CHECK(clean_utterance(once).text == once);
    CHECK(once.find_first_of("[]<>\t\n\x15") == std::string::npos);
    CHECK(once.find("\xE2\x80\xA2") == std::string::npos);
  }
}

TEST_CASE("parse_id_header follows the default layout") {
  const IdFieldLayout layout;
  const auto f = parse_id_header("@ID: eng|corp|PAR|62;|female|ProbableAD|||13||", layout);
  CHECK(f.is_participant);
  CHECK(f.age == 62);
  CHECK(f.sex == Sex::Female);
  CHECK(f.diagnosis == Diagnosis::AD);
  CHECK(f.mmse == 13);

  const auto inv = parse_id_header("@ID: eng|corp|INV|||||Investigator|||", layout);
  CHECK_FALSE(inv.is_participant);

  const auto ctl = parse_id_header("@ID: eng|corp|PAR|62;|female|Control||||", layout);
  CHECK(ctl.diagnosis == Diagnosis::Control);
  CHECK_FALSE(ctl.mmse);
}

TEST_CASE("parse_id_header warns on unparseable fields") {
  std::vector<std::string> warnings;
  const auto f =
      parse_id_header("@ID: eng|corp|PAR|x;|male|control|||31||", IdFieldLayout{}, &warnings);
  CHECK_FALSE(f.age);
  CHECK_FALSE(f.mmse);
  CHECK(f.diagnosis == Diagnosis::Control);
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].rfind("UnparseableAge", 0) == 0);
  CHECK(warnings[1].rfind("UnparseableMmse", 0) == 0);
}

TEST_CASE("IdFieldLayout parses overrides") {
  const auto layout = IdFieldLayout::parse("mmse=9, age=4");
  CHECK(layout.mmse == 9);
  CHECK(layout.age == 4);
  CHECK(layout.sex == 4);
  CHECK(kind_of([] { IdFieldLayout::parse("weight=3"); }) == ErrorKind::Config);
}

TEST_CASE("parse_transcript keeps PAR and INV tiers in file order") {
  const auto t = parse_transcript("@Begin\n*PAR:\tthe boy fell .\n*INV:\tmhm .\n@End\n", "t1");
  REQUIRE(t.utterances.size() == 2);
  CHECK(t.utterances[0].speaker == Speaker::PAR);
  CHECK(t.utterances[1].speaker == Speaker::INV);
  CHECK(t.utterances[1].index == 1);
  CHECK(t.meta.transcript_id == "t1");
}

TEST_CASE("parse_transcript error paths") {
  CHECK(kind_of([] { parse_transcript("@Begin\n%mor:\tn|boy\n@End\n", "x"); }) ==
        ErrorKind::NoParticipantSpeech);
  CHECK(kind_of([] { parse_transcript("*PAR:\thi .\n", "x"); }) == ErrorKind::MalformedHeader);

  std::vector<std::string> warnings;
  ParseOptions lenient;
  lenient.strict_envelope = false;
  const auto t = parse_transcript("*PAR:\thi .\n", "x", lenient, &warnings);
  CHECK(t.utterances.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("fixtures parse to the golden JSONL byte for byte") {
  std::vector<Transcript> parsed;
  for (const char* name : {"a01_markers.cha", "a02_timecodes.cha", "a03_continuation.cha",
                           "a04_missing_mmse.cha"})
    parsed.push_back(parse_file(fixture(name)));
  CHECK(io::write_transcripts_jsonl(parsed) == io::read_text_file(fixture("golden_strict.jsonl")));

  ParseOptions lenient;
  lenient.strict_envelope = false;
  std::vector<std::string> warnings;
  const auto malformed = parse_file(fixture("a06_malformed_header.cha"), lenient, &warnings);
  CHECK(io::write_transcripts_jsonl({malformed}) ==
        io::read_text_file(fixture("golden_lenient_malformed.jsonl")));
  CHECK(warnings.size() == 2);  // bad MMSE slot + missing envelope

  CHECK(kind_of([] { parse_file(fixture("a05_inv_only.cha")); }) ==
        ErrorKind::NoParticipantSpeech);
  CHECK(kind_of([] { parse_file(fixture("a06_malformed_header.cha")); }) ==
        ErrorKind::MalformedHeader);
}

TEST_CASE("transcript JSON survives a round trip") {
  const auto t = parse_file(fixture("a02_timecodes.cha"));
  const auto back = io::read_transcripts_jsonl(io::write_transcripts_jsonl({t}));
  REQUIRE(back.size() == 1);
  CHECK(io::write_transcripts_jsonl(back) == io::write_transcripts_jsonl({t}));
}
