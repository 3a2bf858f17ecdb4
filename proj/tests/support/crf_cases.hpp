#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "adscreen/crf.hpp"
#include "adscreen/rng.hpp"
#include "oracles.hpp"

// Random small CRF instances and the checks shared by unit and acceptance tests.
namespace crf_cases {

struct Instance {
  adscreen::crf::CrfModel model;
  std::vector<adscreen::crf::FeatureSequence> seqs;
  std::vector<std::vector<int>> labels;
};

inline Instance random_instance(adscreen::Rng& rng, std::size_t max_len, std::size_t max_feat) {
  Instance inst;
  const std::size_t f = 1 + rng.below(max_feat);
  inst.model = adscreen::crf::CrfModel::zeros(f);
  for (double& w : inst.model.weights) w = rng.normal();
  const std::size_t count = 1 + rng.below(3);
  for (std::size_t s = 0; s < count; ++s) {
    adscreen::crf::FeatureSequence seq;
    seq.transcript_id = "s" + std::to_string(s);
    const std::size_t len = 1 + rng.below(max_len);
    std::vector<int> y(len);
    for (std::size_t t = 0; t < len; ++t) {
      std::vector<double> x(f);
      for (double& v : x) v = rng.normal();
      seq.steps.push_back(x);
      y[t] = static_cast<int>(rng.below(2));
    }
    inst.seqs.push_back(seq);
    inst.labels.push_back(y);
  }
  return inst;
}

// Largest relative error between the analytic gradient and central differences
// of the smooth objective.
inline double gradient_error(const Instance& inst, double c2) {
  const auto grad = adscreen::crf::smooth_gradient(inst.model, inst.seqs, inst.labels, c2);
  double worst = 0.0;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const double h = 1e-5;
    auto plus = inst.model;
    auto minus = inst.model;
    plus.weights[k] += h;
    minus.weights[k] -= h;
    const double fd = (adscreen::crf::objective(plus, inst.seqs, inst.labels, 0.0, c2) -
                       adscreen::crf::objective(minus, inst.seqs, inst.labels, 0.0, c2)) /
                      (2 * h);
    worst = std::max(worst, std::abs(grad[k] - fd) / std::max({1.0, std::abs(fd), std::abs(grad[k])}));
  }
  return worst;
}

// Largest deviation of log partition, node marginals, log likelihood and best
// path score from exhaustive enumeration. Also counts Viterbi paths that are not
// optimal.
struct EnumerationCheck {
  double worst = 0.0;
  int bad_paths = 0;
};

inline EnumerationCheck compare_with_enumeration(const adscreen::crf::CrfModel& model,
                                                 const adscreen::crf::FeatureSequence& seq,
                                                 const std::vector<int>& labels) {
  using namespace adscreen::crf;
  const auto state = [&](int y, std::size_t t) {
    double s = 0.0;
    for (std::size_t f = 0; f < model.n_features; ++f) s += model.state(y, f) * seq.steps[t][f];
    return s;
  };
  const auto trans = [&](int a, int b) { return model.transition(a, b); };
  const auto ref = oracle::enumerate_paths(seq.steps.size(), state, trans);
  const auto fb = forward_backward(model, seq);
  EnumerationCheck out;
  auto note = [&](double a, double b) { out.worst = std::max(out.worst, std::abs(a - b)); };
  note(fb.log_partition, ref.log_partition);
  for (std::size_t t = 0; t < seq.steps.size(); ++t)
    for (int y = 0; y < kNumLabels; ++y) note(fb.node[t][y], ref.marginals[t][y]);
  double gold = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    gold += state(labels[t], t);
    if (t > 0) gold += trans(labels[t - 1], labels[t]);
  }
  note(log_likelihood(model, seq, labels), gold - ref.log_partition);
  const auto path = viterbi_decode(model, seq);
  if (std::abs(path_score(model, seq, path) - ref.best_score) > 1e-8) ++out.bad_paths;
  return out;
}

}  // namespace crf_cases
