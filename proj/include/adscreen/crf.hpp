#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace adscreen::crf {

inline constexpr int kNonAD = 0;
inline constexpr int kAD = 1;
inline constexpr int kNumLabels = 2;

struct CrfParams {
  double c1 = 0.0;   // L1 coefficient
  double c2 = 0.01;  // L2 coefficient
  int max_iter = 1000;
  double tol = 1e-9;  // relative objective change that counts as converged
  std::uint64_t seed = 0;

  void validate() const;
};

struct FeatureSequence {
  std::string transcript_id;
  std::vector<std::vector<double>> steps;  // one real-valued feature vector per utterance
};

// Weights live in one flat vector: state weights (label-major, n_features per
// label) followed by the 2x2 transition block (row = previous label).
struct CrfModel {
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;
  std::vector<double> weights;

  static CrfModel zeros(std::size_t n_features);

  double state(int label, std::size_t feature) const {
    return weights[static_cast<std::size_t>(label) * n_features + feature];
  }
  double transition(int from, int to) const {
    return weights[kNumLabels * n_features + static_cast<std::size_t>(from * kNumLabels + to)];
  }
  std::size_t transition_offset() const { return kNumLabels * n_features; }
};

struct Marginals {
  double log_partition = 0.0;
  std::vector<std::array<double, kNumLabels>> node;  // per step, sums to 1
};

// Score of one label path: emissions plus transitions.
double path_score(const CrfModel& model, const FeatureSequence& seq, std::span<const int> labels);

Marginals forward_backward(const CrfModel& model, const FeatureSequence& seq);

double log_likelihood(const CrfModel& model, const FeatureSequence& seq,
                      std::span<const int> labels);

// Penalised objective sum log P(y|x) - c1 |w|_1 - c2 |w|_2^2 (to be maximised).
double objective(const CrfModel& model, const std::vector<FeatureSequence>& seqs,
                 const std::vector<std::vector<int>>& labels, double c1, double c2);

// Gradient of sum log P(y|x) - c2 |w|_2^2 with respect to the flat weights.
std::vector<double> smooth_gradient(const CrfModel& model, const std::vector<FeatureSequence>& seqs,
                                    const std::vector<std::vector<int>>& labels, double c2);

struct TrainReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

CrfModel crf_train(const std::vector<FeatureSequence>& seqs,
                   const std::vector<std::vector<int>>& labels, const CrfParams& params,
                   std::vector<std::string> feature_names = {}, TrainReport* report = nullptr);

// Highest scoring path; equal scores resolve toward NonAD.
std::vector<int> viterbi_decode(const CrfModel& model, const FeatureSequence& seq);

// Label at the last position of the Viterbi path.
int transcript_prediction(const CrfModel& model, const FeatureSequence& seq);

nlohmann::ordered_json to_json(const CrfModel& model);
CrfModel crf_from_json(const nlohmann::ordered_json& j);

}  // namespace adscreen::crf
