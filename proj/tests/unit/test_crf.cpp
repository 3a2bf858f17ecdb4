#include <doctest.h>

#include <cmath>

#include "adscreen/crf.hpp"
#include "adscreen/error.hpp"
#include "adscreen/rng.hpp"
#include "crf_cases.hpp"

using namespace adscreen;
using namespace adscreen::crf;

namespace {

FeatureSequence sequence(std::vector<std::vector<double>> steps) {
  FeatureSequence s;
  s.transcript_id = "seq";
  s.steps = std::move(steps);
  return s;
}

double l2(const CrfModel& m) {
  double s = 0.0;
  for (double w : m.weights) s += w * w;
  return std::sqrt(s);
}

// p_AD plus bias, replicated labels.
void separable_set(std::vector<FeatureSequence>& seqs, std::vector<std::vector<int>>& labels) {
  Rng rng(12);
  for (int i = 0; i < 12; ++i) {
    const int y = i % 2;
    std::vector<std::vector<double>> steps;
    const std::size_t len = 2 + rng.below(4);
    for (std::size_t t = 0; t < len; ++t)
      steps.push_back({y ? 0.7 + 0.3 * rng.uniform() : 0.3 * rng.uniform(), 1.0});
    seqs.push_back(sequence(steps));
    labels.emplace_back(len, y);
  }
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = crf_cases::random_instance(rng, 5, 4);
    CHECK(crf_cases::gradient_error(inst, trial % 2 ? 0.1 : 0.0) <= 1e-5);
  }
}

TEST_CASE("inference agrees with exhaustive enumeration") {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = crf_cases::random_instance(rng, 6, 3);
    for (std::size_t s = 0; s < inst.seqs.size(); ++s) {
      const auto check = crf_cases::compare_with_enumeration(inst.model, inst.seqs[s], inst.labels[s]);
      CHECK(check.worst <= 1e-8);
      CHECK(check.bad_paths == 0);
      for (const auto& m : forward_backward(inst.model, inst.seqs[s]).node)
        CHECK(m[0] + m[1] == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("zero model is uniform and decodes to NonAD") {
  const auto model = CrfModel::zeros(2);
  const auto seq = sequence({{1, 2}, {3, 4}, {5, 6}});
  for (const auto& m : forward_backward(model, seq).node) {
    CHECK(m[0] == doctest::Approx(0.5));
    CHECK(m[1] == doctest::Approx(0.5));
  }
  CHECK(viterbi_decode(model, seq) == std::vector<int>{kNonAD, kNonAD, kNonAD});
}

TEST_CASE("length-one marginals are the softmax of state scores") {
  auto model = CrfModel::zeros(1);
  model.weights[0] = 0.2;  // NonAD
  model.weights[1] = 1.5;  // AD
  const auto m = forward_backward(model, sequence({{2.0}}));
  CHECK(m.node[0][1] == doctest::Approx(1.0 / (1.0 + std::exp(0.4 - 3.0))));
}

TEST_CASE("single-node bias model learns the AD label") {
  CrfParams p;
  p.c2 = 0.01;
  const auto model = crf_train({sequence({{1.0}})}, {{kAD}}, p);
  const auto seq = sequence({{1.0}});
  CHECK(forward_backward(model, seq).node[0][kAD] > 0.5);
  CHECK(transcript_prediction(model, seq) == kAD);
}

TEST_CASE("huge L1 penalty zeroes every weight") {
  std::vector<FeatureSequence> seqs;
  std::vector<std::vector<int>> labels;
  separable_set(seqs, labels);
  CrfParams p;
  p.c1 = 1e6;
  const auto model = crf_train(seqs, labels, p);
  for (double w : model.weights) CHECK(w == 0.0);
  CHECK(transcript_prediction(model, seqs[1]) == kNonAD);
}

TEST_CASE("separable probability feature gives perfect transcript accuracy") {
  std::vector<FeatureSequence> seqs;
  std::vector<std::vector<int>> labels;
  separable_set(seqs, labels);
  CrfParams p;
  p.c1 = 0.01;
  p.c2 = 0.01;
  TrainReport report;
  const auto model = crf_train(seqs, labels, p, {"p_ad", "bias"}, &report);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    CHECK(transcript_prediction(model, seqs[i]) == labels[i].back());
    CHECK(viterbi_decode(model, seqs[i]) == labels[i]);
  }
  for (std::size_t k = 1; k < report.objective_trace.size(); ++k)
    CHECK(report.objective_trace[k] >= report.objective_trace[k - 1] - 1e-9);
}

TEST_CASE("stronger L2 never grows the weight norm") {
  std::vector<FeatureSequence> seqs;
  std::vector<std::vector<int>> labels;
  separable_set(seqs, labels);
  double prev = INFINITY;
  for (double c2 : {0.01, 0.05, 0.2, 1.0, 5.0}) {
    CrfParams p;
    p.c2 = c2;
    p.max_iter = 5000;
    p.tol = 1e-13;
    const double norm = l2(crf_train(seqs, labels, p));
    CHECK(norm <= prev + 1e-6);
    prev = norm;
  }
}

TEST_CASE("dominant AD transitions and emissions decode to all AD") {
  auto model = CrfModel::zeros(1);
  model.weights[1] = 2.0;
  model.weights[model.transition_offset() + 3] = 3.0;  // AD -> AD
  const auto seq = sequence({{1.0}, {0.5}, {1.0}, {0.2}});
  CHECK(viterbi_decode(model, seq) == std::vector<int>(4, kAD));
}

TEST_CASE("transcript prediction reads the last decoded state") {
  auto model = CrfModel::zeros(1);
  model.weights[1] = 1.0;  // AD state weight on the single feature
  CHECK(viterbi_decode(model, sequence({{-1.0}, {-1.0}, {1.0}})) ==
        std::vector<int>{kNonAD, kNonAD, kAD});
  CHECK(transcript_prediction(model, sequence({{-1.0}, {-1.0}, {1.0}})) == kAD);
  CHECK(transcript_prediction(model, sequence({{1.0}})) == kAD);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(crf_train({}, {}, CrfParams{}), Error);
  CHECK_THROWS_AS(crf_train({sequence({{1.0}, {1.0, 2.0}})}, {{0, 0}}, CrfParams{}), Error);
  CHECK_THROWS_AS(crf_train({sequence({{1.0}})}, {{0, 1}}, CrfParams{}), Error);
}

TEST_CASE("model JSON round trip") {
  auto model = CrfModel::zeros(2);
  model.feature_names = {"p_ad", "bias"};
  for (std::size_t k = 0; k < model.weights.size(); ++k) model.weights[k] = 0.1 * k - 0.3;
  CHECK(to_json(crf_from_json(to_json(model))).dump() == to_json(model).dump());
}
