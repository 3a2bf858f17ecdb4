#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "adscreen/experiment.hpp"
#include "adscreen/io.hpp"
#include "cli.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = adscreen::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// Fresh scratch directory holding a small synthetic .cha corpus under cha/.
fs::path scratch(const std::string& name, std::size_t n_transcripts = 0) {
  const auto dir = fs::temp_directory_path() / ("adscreen_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  if (n_transcripts) synthetic::write_corpus(synthetic::make_corpus(n_transcripts, 17), (dir / "cha").string());
  return dir;
}

Json read_json(const fs::path& p) { return Json::parse(adscreen::io::read_text_file(p.string())); }

}  // namespace

TEST_CASE("parse on the fixtures writes four records") {
  const auto dir = scratch("parse");
  const auto out = (dir / "t.jsonl").string();
  const auto r = run({"parse", ADSCREEN_FIXTURE_DIR, "--out", out});
  CHECK(r.code == 0);
  CHECK(count_lines(adscreen::io::read_text_file(out)) == 4);
  CHECK(r.err.find("skipped") != std::string::npos);
}

TEST_CASE("usage errors exit 2 with one machine-parsable line") {
  auto r = run({"crf", "--task", "regress"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage: UnsupportedCombination:", 0) == 0);
  CHECK(count_lines(r.err) == 1);

  r = run({"train", "--model", "gbdt_crf", "--task", "regress", "--variant", "PAR_SPLT", "--in", "x", "--out", "y"});
  CHECK(r.code == 2);
  CHECK(r.err.find("UnsupportedCombination") != std::string::npos);

  r = run({"evaluate", "--model", "nonsense"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage: ", 0) == 0);

  r = run({});
  CHECK(r.code == 2);
}

TEST_CASE("data errors exit 3") {
  const auto r = run({"evaluate", "--in", "/definitely/not/here", "--grid", "none"});
  CHECK(r.code == 3);
  CHECK(r.err.rfind("error: data: Io:", 0) == 0);
  CHECK(count_lines(r.err) == 1);
}

TEST_CASE("unknown configuration keys are usage errors") {
  const auto dir = scratch("badkey");
  adscreen::io::atomic_write_file((dir / "c.json").string(), R"({"model": {"kind": "svm", "colour": 1}})");
  const auto r = run({"run", (dir / "c.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("model.colour") != std::string::npos);
}

TEST_CASE("help for every subcommand lists every configuration key") {
  for (const char* sub : {"parse", "build", "train", "gridsearch", "evaluate", "predict", "report", "run"}) {
    const auto r = run({sub, "--help"});
    CHECK(r.code == 0);
    for (const auto& [key, desc] : adscreen::experiment::config_keys()) {
      INFO(sub << " " << key);
      CHECK(r.out.find(key) != std::string::npos);
    }
  }
}

TEST_CASE("flags override the configuration file, which overrides ADSCREEN_SEED") {
  const auto dir = scratch("layering", 24);
  Json config = {{"data", {{"transcripts", (dir / "cha").string()}}},
                 {"model", {{"kind", "svm"}}},
                 {"grid", {{"preset", "none"}}},
                 {"folds", {{"report_k", 3}}},
                 {"threads", 1}};
  adscreen::io::atomic_write_file((dir / "c.json").string(), config.dump());

  ::setenv("ADSCREEN_SEED", "77", 1);
  auto r = run({"run", (dir / "c.json").string(), "--report-k", "4", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  auto manifest = read_json(dir / "a" / "manifest.json");
  CHECK(manifest["config"]["folds"]["report_k"] == 4);
  CHECK(manifest["seeds"]["master"] == 77);

  config["seed"] = 5;
  adscreen::io::atomic_write_file((dir / "c.json").string(), config.dump());
  r = run({"run", (dir / "c.json").string(), "--out", (dir / "b").string()});
  REQUIRE(r.code == 0);
  manifest = read_json(dir / "b" / "manifest.json");
  CHECK(manifest["config"]["folds"]["report_k"] == 3);
  CHECK(manifest["seeds"]["master"] == 5);

  r = run({"run", (dir / "c.json").string(), "--seed", "9", "--out", (dir / "c").string()});
  REQUIRE(r.code == 0);
  CHECK(read_json(dir / "c" / "manifest.json")["seeds"]["master"] == 9);
  ::unsetenv("ADSCREEN_SEED");
}

TEST_CASE("run twice with the same seed gives identical metrics files") {
  const auto dir = scratch("determinism", 24);
  Json config = {{"data", {{"transcripts", (dir / "cha").string()}}},
                 {"model", {{"kind", "svm"}}},
                 {"grid", {{"preset", "none"}, {"axes", {{"C", {0.5, 1.0}}}}}},
                 {"folds", {{"select_k", 3}, {"report_k", 4}}},
                 {"seed", 11}};
  adscreen::io::atomic_write_file((dir / "c.json").string(), config.dump());
  for (const char* out : {"x", "y"}) {
    const auto r = run({"run", (dir / "c.json").string(), "--out", (dir / out).string()});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"metrics.json", "folds.csv", "summary.txt", "search.json"}) {
    INFO(f);
    CHECK(adscreen::io::read_text_file((dir / "x" / f).string()) ==
          adscreen::io::read_text_file((dir / "y" / f).string()));
  }
}

TEST_CASE("failures leave no output files behind") {
  const auto dir = scratch("nopartial", 6);
  const auto out = dir / "out";
  // Six transcripts cannot fill ten reporting folds.
  const auto r = run({"evaluate", "--in", (dir / "cha").string(), "--out", out.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("TooFewGroups") != std::string::npos);
  CHECK(!fs::exists(out));

  const auto t = run({"parse", (dir / "missing.cha").string(), "--out", (dir / "t.jsonl").string()});
  CHECK(t.code == 3);
  CHECK(!fs::exists(dir / "t.jsonl"));
}

TEST_CASE("parse, build, train, predict and report chain together") {
  const auto dir = scratch("chain", 24);
  auto r = run({"-q", "parse", (dir / "cha").string(), "--out", (dir / "t.jsonl").string()});
  REQUIRE(r.code == 0);

  r = run({"build", "--variant", "PAR_SPLT_T", "--in", (dir / "t.jsonl").string(), "--out", (dir / "data").string()});
  REQUIRE(r.code == 0);
  const auto dataset = (dir / "data" / "PAR_SPLT_T.jsonl").string();
  CHECK(adscreen::io::read_text_file(dataset).rfind(R"({"variant":"PAR_SPLT_T")", 0) == 0);

  r = run({"train", "--in", dataset, "--variant", "PAR_SPLT_T", "--model", "svm_crf", "--seed", "1", "--out",
           (dir / "model").string()});
  REQUIRE(r.code == 0);
  const auto model = read_json(dir / "model" / "model.json");
  CHECK(model["pipeline"].contains("crf"));

  r = run({"predict", "--model", (dir / "model" / "model.json").string(), "--in", dataset, "--out",
           (dir / "pred.csv").string()});
  REQUIRE(r.code == 0);
  const auto csv = adscreen::io::read_text_file((dir / "pred.csv").string());
  CHECK(csv.rfind("id,label,score\n", 0) == 0);
  CHECK(count_lines(csv) == 25);

  r = run({"predict", "--model", (dir / "model" / "model.json").string(), "--in", dataset, "--variant", "PAR"});
  CHECK(r.code == 2);

  r = run({"evaluate", "--in", (dir / "t.jsonl").string(), "--model", "svm", "--report-k", "4", "--seed", "2",
           "--out", (dir / "eval").string()});
  REQUIRE(r.code == 0);
  r = run({"report", (dir / "eval").string(), "--compare", "table2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Dataset") == 0);
  CHECK(r.out.find("ours / published") != std::string::npos);
  CHECK(r.out.find("of 22 published rows have a matching run") != std::string::npos);

  r = run({"report", (dir / "eval").string(), "--compare", "table9"});
  CHECK(r.code == 2);
}

TEST_CASE("gridsearch writes the search and its best parameters feed train") {
  const auto dir = scratch("grid", 24);
  auto r = run({"gridsearch", "--in", (dir / "cha").string(), "--model", "svm", "--grid-axes",
                R"({"C": [0.5, 2.0], "kernel": ["rbf"]})", "--select-k", "3", "--seed", "4", "--out",
                (dir / "g").string()});
  REQUIRE(r.code == 0);
  const auto search = read_json(dir / "g" / "search.json");
  CHECK(search["n_configs"] == 2);

  r = run({"train", "--in", (dir / "cha").string(), "--model", "svm", "--params", (dir / "g" / "search.json").string(),
           "--out", (dir / "m").string()});
  REQUIRE(r.code == 0);
  CHECK(read_json(dir / "m" / "model.json")["params"]["C"] == search["best_params"]["C"]);
}
