#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adscreen/sparse.hpp"

namespace adscreen::svm {

enum class Kernel { Rbf, Sigmoid };

std::string_view to_string(Kernel kernel);
Kernel parse_kernel(std::string_view name);

struct SvmParams {
  Kernel kernel = Kernel::Rbf;
  double C = 1.0;
  std::optional<double> gamma;  // empty means "auto"
  double coef0 = 0.0;
  double epsilon = 0.1;  // SVR tube half-width
  double tol = 1e-3;     // stop when the maximal KKT violation drops below this
  std::int64_t max_iter = 10'000'000;
  // Fit Platt scaling on 3-fold out-of-fold decisions after training a classifier.
  bool probability = false;

  void validate() const;
};

struct Platt {
  double A = 0.0;
  double B = 0.0;
};

enum class ModelType { Classifier, Regressor };

struct SvmModel {
  ModelType type = ModelType::Classifier;
  SvmParams params;
  double gamma = 1.0;  // resolved value
  std::size_t n_features = 0;
  SparseMatrix support_vectors;
  std::vector<double> dual_coef;  // alpha_i * y_i (SVC) or alpha_i - alpha_i* (SVR)
  double bias = 0.0;
  std::optional<Platt> platt;
};

// Diagnostics from one solver run. alpha is indexed by training row; for SVR it
// holds alpha followed by alpha*.
struct TrainTrace {
  std::vector<double> alpha;
  std::vector<double> dual_objective;  // after each accepted pair update
  std::int64_t iterations = 0;
  bool record_objective = false;
};

// rbf: exp(-gamma * |a - b|^2), sigmoid: tanh(gamma * <a, b> + coef0)
double kernel_eval(Kernel kernel, double gamma, double coef0, const SparseRow& a,
                   const SparseRow& b);

// 1 / (n_features * mean per-column variance), denominator floored at 1e-12.
double auto_gamma(const SparseMatrix& X);

// Labels are +1 / -1.
SvmModel train_svc(const SparseMatrix& X, std::span<const int> y, const SvmParams& params,
                   std::uint64_t seed, TrainTrace* trace = nullptr);
SvmModel train_svr(const SparseMatrix& X, std::span<const double> y, const SvmParams& params,
                   std::uint64_t seed, TrainTrace* trace = nullptr);

std::vector<double> predict_decision(const SvmModel& model, const SparseMatrix& X);
std::vector<double> predict_proba(const SvmModel& model, const SparseMatrix& X);
std::vector<double> predict_svr(const SvmModel& model, const SparseMatrix& X);

// Minimises the negative log-likelihood of p = 1 / (1 + exp(A f + B)) against
// smoothed targets (N+ + 1) / (N+ + 2) and 1 / (N- + 2) with Newton steps.
Platt fit_platt(std::span<const double> decisions, std::span<const int> labels,
                int max_iter = 100);
double platt_probability(const Platt& platt, double decision);

nlohmann::ordered_json to_json(const SvmModel& model);
SvmModel svm_from_json(const nlohmann::ordered_json& j);

}  // namespace adscreen::svm
