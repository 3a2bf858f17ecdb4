#include "adscreen/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adscreen/error.hpp"

namespace adscreen::crf {

namespace {

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_sequence(const CrfModel& model, const FeatureSequence& seq) {
  if (seq.steps.empty())
    throw Error(ErrorKind::EmptySequence, "CRF sequence '" + seq.transcript_id + "' is empty");
  for (const auto& step : seq.steps) {
    if (step.size() != model.n_features)
      throw Error(ErrorKind::DimensionMismatch,
                  "CRF step has " + std::to_string(step.size()) + " features, model expects " +
                      std::to_string(model.n_features));
    for (double v : step) {
      if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "CRF feature is NaN or inf");
    }
  }
}

using Emissions = std::vector<std::array<double, kNumLabels>>;

Emissions emissions(const CrfModel& model, const FeatureSequence& seq) {
  Emissions e(seq.steps.size());
  for (std::size_t t = 0; t < seq.steps.size(); ++t) {
    for (int y = 0; y < kNumLabels; ++y) {
      double s = 0.0;
      for (std::size_t f = 0; f < model.n_features; ++f) s += model.state(y, f) * seq.steps[t][f];
      e[t][static_cast<std::size_t>(y)] = s;
    }
  }
  return e;
}

struct Lattice {
  Emissions emit;
  Emissions alpha;
  Emissions beta;
  double log_z = 0.0;
};

Lattice run_lattice(const CrfModel& model, const FeatureSequence& seq) {
  Lattice lat;
  lat.emit = emissions(model, seq);
  const std::size_t L = seq.steps.size();
  lat.alpha.resize(L);
  lat.beta.resize(L);
  lat.alpha[0] = lat.emit[0];
  for (std::size_t t = 1; t < L; ++t) {
    for (int y = 0; y < kNumLabels; ++y) {
      double acc = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumLabels; ++a)
        acc = log_sum_exp(acc, lat.alpha[t - 1][static_cast<std::size_t>(a)] + model.transition(a, y));
      lat.alpha[t][static_cast<std::size_t>(y)] = lat.emit[t][static_cast<std::size_t>(y)] + acc;
    }
  }
  lat.beta[L - 1] = {0.0, 0.0};
  for (std::size_t t = L - 1; t-- > 0;) {
    for (int a = 0; a < kNumLabels; ++a) {
      double acc = -std::numeric_limits<double>::infinity();
      for (int b = 0; b < kNumLabels; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        acc = log_sum_exp(acc, model.transition(a, b) + lat.emit[t + 1][bi] + lat.beta[t + 1][bi]);
      }
      lat.beta[t][static_cast<std::size_t>(a)] = acc;
    }
  }
  lat.log_z = log_sum_exp(lat.alpha[L - 1][0], lat.alpha[L - 1][1]);
  return lat;
}

void check_labels(const FeatureSequence& seq, std::span<const int> labels) {
  if (labels.size() != seq.steps.size())
    throw Error(ErrorKind::DimensionMismatch, "CRF label sequence length differs from steps");
  for (int y : labels) {
    if (y != kNonAD && y != kAD) throw Error(ErrorKind::DataFormat, "CRF labels must be 0 or 1");
  }
}

double l1_norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += std::abs(v);
  return s;
}

double l2_squared(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s;
}

}  // namespace

void CrfParams::validate() const {
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw Error(ErrorKind::Config, "CRF c1 and c2 must be >= 0");
  if (max_iter < 0) throw Error(ErrorKind::Config, "CRF max_iter must be >= 0");
  if (!(tol > 0.0)) throw Error(ErrorKind::Config, "CRF tol must be positive");
}

CrfModel CrfModel::zeros(std::size_t n_features) {
  CrfModel model;
  model.n_features = n_features;
  model.weights.assign(kNumLabels * n_features + kNumLabels * kNumLabels, 0.0);
  return model;
}

double path_score(const CrfModel& model, const FeatureSequence& seq, std::span<const int> labels) {
  check_sequence(model, seq);
  check_labels(seq, labels);
  const auto e = emissions(model, seq);
  double s = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    s += e[t][static_cast<std::size_t>(labels[t])];
    if (t > 0) s += model.transition(labels[t - 1], labels[t]);
  }
  return s;
}

Marginals forward_backward(const CrfModel& model, const FeatureSequence& seq) {
  check_sequence(model, seq);
  const auto lat = run_lattice(model, seq);
  Marginals m;
  m.log_partition = lat.log_z;
  m.node.resize(seq.steps.size());
  for (std::size_t t = 0; t < seq.steps.size(); ++t) {
    for (std::size_t y = 0; y < kNumLabels; ++y)
      m.node[t][y] = std::exp(lat.alpha[t][y] + lat.beta[t][y] - lat.log_z);
  }
  return m;
}

double log_likelihood(const CrfModel& model, const FeatureSequence& seq,
                      std::span<const int> labels) {
  const double score = path_score(model, seq, labels);
  return score - run_lattice(model, seq).log_z;
}

double objective(const CrfModel& model, const std::vector<FeatureSequence>& seqs,
                 const std::vector<std::vector<int>>& labels, double c1, double c2) {
  double ll = 0.0;
  for (std::size_t s = 0; s < seqs.size(); ++s) ll += log_likelihood(model, seqs[s], labels[s]);
  return ll - c1 * l1_norm(model.weights) - c2 * l2_squared(model.weights);
}

namespace {

double unchecked_log_likelihood(const CrfModel& model, const FeatureSequence& seq,
                                std::span<const int> labels) {
  const auto lat = run_lattice(model, seq);
  double s = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    s += lat.emit[t][static_cast<std::size_t>(labels[t])];
    if (t > 0) s += model.transition(labels[t - 1], labels[t]);
  }
  return s - lat.log_z;
}

std::vector<double> unchecked_gradient(const CrfModel& model, const std::vector<FeatureSequence>& seqs,
                                       const std::vector<std::vector<int>>& labels, double c2) {
  std::vector<double> g(model.weights.size(), 0.0);
  const std::size_t F = model.n_features;
  const std::size_t T0 = model.transition_offset();
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& seq = seqs[s];
    const auto lat = run_lattice(model, seq);
    const std::size_t L = seq.steps.size();
    for (std::size_t t = 0; t < L; ++t) {
      const auto& x = seq.steps[t];
      for (int y = 0; y < kNumLabels; ++y) {
        const auto yi = static_cast<std::size_t>(y);
        const double observed = labels[s][t] == y ? 1.0 : 0.0;
        const double expected = std::exp(lat.alpha[t][yi] + lat.beta[t][yi] - lat.log_z);
        const double coef = observed - expected;
        for (std::size_t f = 0; f < F; ++f) g[yi * F + f] += coef * x[f];
      }
      if (t == 0) continue;
      for (int a = 0; a < kNumLabels; ++a) {
        for (int b = 0; b < kNumLabels; ++b) {
          const auto ai = static_cast<std::size_t>(a);
          const auto bi = static_cast<std::size_t>(b);
          const double pair = std::exp(lat.alpha[t - 1][ai] + model.transition(a, b) +
                                       lat.emit[t][bi] + lat.beta[t][bi] - lat.log_z);
          const double observed = (labels[s][t - 1] == a && labels[s][t] == b) ? 1.0 : 0.0;
          g[T0 + ai * kNumLabels + bi] += observed - pair;
        }
      }
    }
  }
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= 2.0 * c2 * model.weights[k];
  return g;
}

}  // namespace

std::vector<double> smooth_gradient(const CrfModel& model, const std::vector<FeatureSequence>& seqs,
                                    const std::vector<std::vector<int>>& labels, double c2) {
  if (seqs.size() != labels.size())
    throw Error(ErrorKind::DimensionMismatch, "CRF: sequence and label counts differ");
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    check_sequence(model, seqs[s]);
    check_labels(seqs[s], labels[s]);
  }
  return unchecked_gradient(model, seqs, labels, c2);
}

CrfModel crf_train(const std::vector<FeatureSequence>& seqs,
                   const std::vector<std::vector<int>>& labels, const CrfParams& params,
                   std::vector<std::string> feature_names, TrainReport* report) {
  params.validate();
  if (seqs.empty()) throw Error(ErrorKind::EmptySequence, "CRF training set is empty");
  if (seqs.size() != labels.size())
    throw Error(ErrorKind::DimensionMismatch, "CRF: sequence and label counts differ");
  if (seqs.front().steps.empty())
    throw Error(ErrorKind::EmptySequence, "CRF sequence '" + seqs.front().transcript_id + "' is empty");

  auto model = CrfModel::zeros(seqs.front().steps.front().size());
  model.feature_names = std::move(feature_names);
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    check_sequence(model, seqs[s]);
    check_labels(seqs[s], labels[s]);
  }

  // Minimise F(w) = h(w) + c1 |w|_1 with h(w) = -sum LL + c2 |w|^2 by
  // monotone accelerated proximal gradient. The step backtracks until the
  // quadratic upper bound holds at the extrapolated point; a candidate that
  // does not lower F is discarded and the momentum restarts from the iterate.
  CrfModel m = CrfModel::zeros(model.n_features);
  const auto smooth_value = [&](const std::vector<double>& w) {
    m.weights = w;
    double ll = 0.0;
    for (std::size_t s = 0; s < seqs.size(); ++s) ll += unchecked_log_likelihood(m, seqs[s], labels[s]);
    return -ll + params.c2 * l2_squared(w);
  };
  const auto gradient_at = [&](const std::vector<double>& w) {
    m.weights = w;
    return unchecked_gradient(m, seqs, labels, params.c2);  // ascent direction of -h
  };
  const auto soft_threshold = [](double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
  };

  const std::size_t K = model.weights.size();
  std::vector<double> x = model.weights;
  std::vector<double> y = x;
  std::vector<double> z(K);
  double obj = smooth_value(x) + params.c1 * l1_norm(x);
  double momentum = 1.0;
  double step = 1.0;
  int it = 0;
  int quiet = 0;
  bool converged = false;
  if (report) report->objective_trace.push_back(-obj);

  for (; it < params.max_iter; ++it) {
    const bool plain_step = momentum == 1.0;
    const double h_y = smooth_value(y);
    const auto grad = gradient_at(y);
    double h_z = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      double decrease_bound = 0.0;
      double dist_sq = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        z[k] = soft_threshold(y[k] + step * grad[k], step * params.c1);
        const double d = z[k] - y[k];
        decrease_bound += -grad[k] * d;
        dist_sq += d * d;
      }
      h_z = smooth_value(z);
      if (h_z <= h_y + decrease_bound + dist_sq / (2.0 * step) + 1e-12 * std::abs(h_y)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double obj_z = h_z + params.c1 * l1_norm(z);
    const double prev = obj;
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if (obj_z <= obj) {
      for (std::size_t k = 0; k < K; ++k) {
        const double x_new = z[k];
        y[k] = x_new + ((momentum - 1.0) / next_momentum) * (x_new - x[k]);
        x[k] = x_new;
      }
      obj = obj_z;
      momentum = next_momentum;
    } else {
      y = x;
      momentum = 1.0;
    }
    if (report) report->objective_trace.push_back(-obj);
    step *= 2.0;
    quiet = std::abs(prev - obj) <= params.tol * std::max(1.0, std::abs(prev)) ? quiet + 1 : 0;
    if (quiet >= 2 && plain_step) {
      converged = true;
      ++it;
      break;
    }
    if (quiet >= 2) {
      y = x;
      momentum = 1.0;
    }
  }
  model.weights = std::move(x);
  if (report) {
    report->iterations = it;
    report->converged = converged;
  }
  return model;
}

std::vector<int> viterbi_decode(const CrfModel& model, const FeatureSequence& seq) {
  check_sequence(model, seq);
  const auto e = emissions(model, seq);
  const std::size_t L = seq.steps.size();
  std::vector<std::array<double, kNumLabels>> delta(L);
  std::vector<std::array<int, kNumLabels>> back(L);
  delta[0] = e[0];
  for (std::size_t t = 1; t < L; ++t) {
    for (int y = 0; y < kNumLabels; ++y) {
      int best = kNonAD;
      double best_score = delta[t - 1][kNonAD] + model.transition(kNonAD, y);
      const double ad_score = delta[t - 1][kAD] + model.transition(kAD, y);
      if (ad_score > best_score) {
        best = kAD;
        best_score = ad_score;
      }
      delta[t][static_cast<std::size_t>(y)] = e[t][static_cast<std::size_t>(y)] + best_score;
      back[t][static_cast<std::size_t>(y)] = best;
    }
  }
  std::vector<int> path(L);
  path[L - 1] = delta[L - 1][kAD] > delta[L - 1][kNonAD] ? kAD : kNonAD;
  for (std::size_t t = L - 1; t > 0; --t)
    path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
  return path;
}

int transcript_prediction(const CrfModel& model, const FeatureSequence& seq) {
  return viterbi_decode(model, seq).back();
}

nlohmann::ordered_json to_json(const CrfModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "adscreen-crf";
  j["version"] = 1;
  j["labels"] = {"NonAD", "AD"};
  j["feature_names"] = model.feature_names;
  auto state = nlohmann::ordered_json::array();
  for (int y = 0; y < kNumLabels; ++y) {
    std::vector<double> row(model.n_features);
    for (std::size_t f = 0; f < model.n_features; ++f) row[f] = model.state(y, f);
    state.push_back(row);
  }
  j["state_weights"] = std::move(state);
  j["transition_weights"] = {{model.transition(0, 0), model.transition(0, 1)},
                             {model.transition(1, 0), model.transition(1, 1)}};
  return j;
}

CrfModel crf_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "adscreen-crf") throw Error(ErrorKind::DataFormat, "not a CRF model");
    const auto state = j.at("state_weights").get<std::vector<std::vector<double>>>();
    const auto trans = j.at("transition_weights").get<std::vector<std::vector<double>>>();
    if (state.size() != kNumLabels || trans.size() != kNumLabels)
      throw Error(ErrorKind::DataFormat, "CRF model must have two labels");
    auto model = CrfModel::zeros(state[0].size());
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (std::size_t y = 0; y < kNumLabels; ++y) {
      if (state[y].size() != model.n_features || trans[y].size() != kNumLabels)
        throw Error(ErrorKind::DataFormat, "CRF weight block has the wrong shape");
      for (std::size_t f = 0; f < model.n_features; ++f)
        model.weights[y * model.n_features + f] = state[y][f];
      for (std::size_t b = 0; b < kNumLabels; ++b)
        model.weights[model.transition_offset() + y * kNumLabels + b] = trans[y][b];
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad CRF model: ") + e.what());
  }
}

}  // namespace adscreen::crf
