#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "adscreen/error.hpp"
#include "adscreen/search.hpp"

using namespace adscreen;
using namespace adscreen::eval;

TEST_CASE("published grids have the expected sizes") {
  CHECK(enumerate_configs(svm_grid()).size() == 240);
  CHECK(svm_grid().size() == 240);
  CHECK(enumerate_configs(gbdt_grid()).size() == 360);
  const auto crf = enumerate_configs(crf_random_search(3));
  CHECK(crf.size() == 15);
  for (const auto& p : crf) {
    CHECK(get_double(p, "c1", -1) > 0.0);
    CHECK(get_double(p, "c2", -1) > 0.0);
  }
}

TEST_CASE("enumeration order and uniqueness") {
  GridSpec g;
  g.axes = {{"a", {std::int64_t{1}, std::int64_t{2}}}, {"b", {std::string("x"), std::string("y"), std::string("z")}}};
  const auto configs = enumerate_configs(g);
  REQUIRE(configs.size() == 6);
  CHECK(to_string(configs[0][1].second) == "x");
  CHECK(to_string(configs[1][1].second) == "y");
  CHECK(to_string(configs[3][0].second) == "2");
  std::set<std::string> seen;
  for (const auto& c : enumerate_configs(svm_grid())) seen.insert(to_json(c).dump());
  CHECK(seen.size() == 240);
}

TEST_CASE("mixed finite and sampled axes multiply") {
  GridSpec g;
  g.axes = {{"C", {0.1, 1.0}}};
  g.sampled = {{"c1", 0.5}};
  g.draws = 4;
  CHECK(enumerate_configs(g).size() == 8);
  CHECK(g.size() == 8);
}

TEST_CASE("exponential sampler") {
  CHECK(sample_exponential(0.5, 0, 1).empty());
  CHECK(0.5 * std::log(2.0) == doctest::Approx(0.3466).epsilon(1e-4));
  CHECK(sample_exponential(0.5, 10, 9) == sample_exponential(0.5, 10, 9));
  for (double scale : {0.5, 0.05}) {
    const auto xs = sample_exponential(scale, 100000, 42);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    CHECK(std::abs(mean - scale) <= 0.02 * scale);
    for (double x : xs) CHECK(x >= 0.0);
  }
  CHECK_THROWS_AS(sample_exponential(0.0, 3, 1), Error);
}

TEST_CASE("grid search picks the first best and records failures") {
  GridSpec g;
  g.axes = {{"x", {std::int64_t{0}, std::int64_t{1}, std::int64_t{2}, std::int64_t{3}, std::int64_t{4}}}};
  const auto configs = enumerate_configs(g);
  const auto score = [](const ParamSet& p) {
    const auto x = get_int(p, "x", 0);
    if (x == 0) throw Error(ErrorKind::SingleClass, "boom");
    return x == 1 || x == 3 ? 1.0 : 0.5;
  };
  for (unsigned threads : {1U, 4U}) {
    const auto r = grid_search(configs, score, threads);
    CHECK(r.best == 1);
    CHECK(r.results[0].error_kind == ErrorKind::SingleClass);
    CHECK_FALSE(r.results[0].score);
    CHECK(*r.results[4].score == 0.5);
  }
  const auto one = grid_search({{{"x", std::int64_t{7}}}}, [](const ParamSet&) { return 0.1; });
  CHECK(one.best == 0);
  CHECK_THROWS_AS(grid_search(configs, [](const ParamSet&) -> double { throw Error(ErrorKind::NonFinite, "x"); }), Error);
}

TEST_CASE("parameter helpers") {
  ParamSet p = {{"n", std::int64_t{3}}, {"r", 0.25}, {"b", true}, {"s", std::string("word")}};
  CHECK(get_double(p, "n", 0) == 3.0);
  CHECK(get_int(p, "n", 0) == 3);
  CHECK(get_bool(p, "b", false));
  CHECK(get_string(p, "s", "") == "word");
  CHECK(get_double(p, "missing", 1.5) == 1.5);
  CHECK_THROWS_AS(get_int(p, "r", 0), Error);
  CHECK_THROWS_AS(get_string(p, "n", ""), Error);
  const auto merged = merge(p, {{"r", 0.5}, {"new", std::int64_t{1}}});
  CHECK(get_double(merged, "r", 0) == 0.5);
  CHECK(merged.size() == 5);
  CHECK(to_json(params_from_json(to_json(p))).dump() == to_json(p).dump());
}
