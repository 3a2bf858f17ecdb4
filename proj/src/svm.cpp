#include "adscreen/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "adscreen/error.hpp"
#include "adscreen/rng.hpp"

namespace adscreen::svm {

namespace {

constexpr double kTau = 1e-12;
constexpr int kFormatVersion = 1;

void check_finite(const SparseMatrix& X) {
  for (double v : X.values()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "feature matrix has NaN or inf");
  }
}

// Lazily computed kernel rows over the training set.
class KernelCache {
 public:
  KernelCache(const SparseMatrix& X, Kernel kernel, double gamma, double coef0)
      : X_(X), kernel_(kernel), gamma_(gamma), coef0_(coef0), rows_(X.rows()), dense_(X.cols(), 0.0) {
    diag_.resize(X.rows());
    norms_.resize(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      diag_[i] = kernel_eval(kernel_, gamma_, coef0_, X.row(i), X.row(i));
      norms_[i] = squared_norm(X.row(i));
    }
  }

  // Row i is scattered once into a dense buffer so each entry costs one pass
  // over the nonzeros of row j.
  const std::vector<double>& row(std::size_t i) {
    auto& r = rows_[i];
    if (r.empty()) {
      r.resize(X_.rows());
      const auto xi = X_.row(i);
      for (std::size_t k = 0; k < xi.nnz(); ++k) dense_[xi.indices[k]] = xi.values[k];
      for (std::size_t j = 0; j < X_.rows(); ++j) {
        if (j == i) {
          r[j] = diag_[i];
          continue;
        }
        const auto xj = X_.row(j);
        double ab = 0.0;
        for (std::size_t k = 0; k < xj.nnz(); ++k) ab += xj.values[k] * dense_[xj.indices[k]];
        r[j] = kernel_ == Kernel::Rbf
                   ? std::exp(-gamma_ * std::max(0.0, norms_[i] + norms_[j] - 2.0 * ab))
                   : std::tanh(gamma_ * ab + coef0_);
      }
      for (std::size_t k = 0; k < xi.nnz(); ++k) dense_[xi.indices[k]] = 0.0;
    }
    return r;
  }

  double diag(std::size_t i) const { return diag_[i]; }

 private:
  const SparseMatrix& X_;
  Kernel kernel_;
  double gamma_;
  double coef0_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> diag_;
  std::vector<double> norms_;
  std::vector<double> dense_;
};

struct SolverResult {
  std::vector<double> alpha;
  double rho = 0.0;
  std::int64_t iterations = 0;
};

// Solves min 0.5 a'Qa + p'a s.t. y'a = const, 0 <= a <= C, where
// Q_st = y_s y_t K(s mod n, t mod n). Working pairs are chosen by the maximal
// violating pair rule; ties go to the earlier index in a seeded permutation.
SolverResult solve(KernelCache& kernel, std::size_t n_rows, std::span<const double> p,
                   std::span<const int> y, double C, double tol, std::int64_t max_iter,
                   std::uint64_t seed, TrainTrace* trace) {
  const std::size_t n = p.size();
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(p.begin(), p.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  const auto K = [&](std::size_t s) -> const std::vector<double>& { return kernel.row(s % n_rows); };
  const auto is_up = [&](std::size_t t) {
    return (y[t] == +1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0);
  };
  const auto is_low = [&](std::size_t t) {
    return (y[t] == +1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C);
  };
  const auto objective = [&] {
    double f = 0.0;
    for (std::size_t t = 0; t < n; ++t) f += alpha[t] * (grad[t] + p[t]);
    return -0.5 * f;
  };

  std::int64_t iter = 0;
  while (iter < max_iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    std::size_t j = n;
    for (auto t : order) {
      const double v = -y[t] * grad[t];
      if (is_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (is_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i == n || j == n || g_max - g_min < tol) break;
    ++iter;

    const auto& Ki = K(i);
    const auto& Kj = K(j);
    const double Kii = kernel.diag(i % n_rows);
    const double Kjj = kernel.diag(j % n_rows);
    const double Kij = Ki[j % n_rows];
    const double Qij = y[i] * y[j] * Kij;
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];

    if (y[i] != y[j]) {
      double quad = Kii + Kjj + 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Kii + Kjj - 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double di = (alpha[i] - old_ai) * y[i];
    const double dj = (alpha[j] - old_aj) * y[j];
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t r = t % n_rows;
      grad[t] += y[t] * (di * Ki[r] + dj * Kj[r]);
    }
    if (trace && trace->record_objective) trace->dual_objective.push_back(objective());
  }

  // Offset from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == +1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  SolverResult result;
  if (n_free > 0) result.rho = sum_free / static_cast<double>(n_free);
  else if (std::isfinite(ub) && std::isfinite(lb)) result.rho = 0.5 * (ub + lb);
  else if (std::isfinite(ub)) result.rho = ub;
  else if (std::isfinite(lb)) result.rho = lb;
  result.alpha = std::move(alpha);
  result.iterations = iter;
  return result;
}

SvmModel assemble(const SparseMatrix& X, const std::vector<double>& coef, double rho,
                  const SvmParams& params, double gamma, ModelType type) {
  SvmModel model;
  model.type = type;
  model.params = params;
  model.gamma = gamma;
  model.n_features = X.cols();
  model.support_vectors = SparseMatrix(X.cols());
  model.bias = -rho;
  for (std::size_t i = 0; i < coef.size(); ++i) {
    if (coef[i] == 0.0) continue;
    const auto r = X.row(i);
    model.support_vectors.push_row(r.indices, r.values);
    model.dual_coef.push_back(coef[i]);
  }
  return model;
}

double decision_value(const SvmModel& model, const SparseRow& x) {
  thread_local std::vector<double> dense;
  const auto& sv = model.support_vectors;
  if (dense.size() < sv.cols()) dense.resize(sv.cols(), 0.0);
  double x_norm = 0.0;
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    x_norm += x.values[k] * x.values[k];
    if (x.indices[k] < sv.cols()) dense[x.indices[k]] = x.values[k];
  }
  double f = model.bias;
  for (std::size_t s = 0; s < model.dual_coef.size(); ++s) {
    const auto row = sv.row(s);
    double ab = 0.0;
    double sv_norm = 0.0;
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      ab += row.values[k] * dense[row.indices[k]];
      sv_norm += row.values[k] * row.values[k];
    }
    const double kv = model.params.kernel == Kernel::Rbf
                          ? std::exp(-model.gamma * std::max(0.0, x_norm + sv_norm - 2.0 * ab))
                          : std::tanh(model.gamma * ab + model.params.coef0);
    f += model.dual_coef[s] * kv;
  }
  for (std::size_t k = 0; k < x.nnz(); ++k)
    if (x.indices[k] < sv.cols()) dense[x.indices[k]] = 0.0;
  return f;
}

SvmModel train_svc_plain(const SparseMatrix& X, std::span<const int> y, const SvmParams& params,
                         double gamma, std::uint64_t seed, TrainTrace* trace) {
  const std::size_t n = X.rows();
  KernelCache kernel(X, params.kernel, gamma, params.coef0);
  const std::vector<double> p(n, -1.0);
  auto result = solve(kernel, n, p, y, params.C, params.tol, params.max_iter, seed, trace);
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) coef[i] = result.alpha[i] * y[i];
  if (trace) {
    trace->alpha = result.alpha;
    trace->iterations = result.iterations;
  }
  return assemble(X, coef, result.rho, params, gamma, ModelType::Classifier);
}

}  // namespace

std::string_view to_string(Kernel kernel) { return kernel == Kernel::Rbf ? "rbf" : "sigmoid"; }

Kernel parse_kernel(std::string_view name) {
  if (name == "rbf") return Kernel::Rbf;
  if (name == "sigmoid") return Kernel::Sigmoid;
  throw Error(ErrorKind::Config, "kernel must be rbf or sigmoid, got '" + std::string(name) + "'");
}

void SvmParams::validate() const {
  if (!(C > 0.0)) throw Error(ErrorKind::Config, "SVM C must be positive");
  if (gamma && !(*gamma > 0.0)) throw Error(ErrorKind::Config, "SVM gamma must be positive");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::Config, "SVR epsilon must be positive");
  if (!(tol > 0.0)) throw Error(ErrorKind::Config, "SVM tol must be positive");
  if (max_iter <= 0) throw Error(ErrorKind::Config, "SVM max_iter must be positive");
}

double kernel_eval(Kernel kernel, double gamma, double coef0, const SparseRow& a,
                   const SparseRow& b) {
  if (kernel == Kernel::Rbf) return std::exp(-gamma * squared_distance(a, b));
  return std::tanh(gamma * dot(a, b) + coef0);
}

double auto_gamma(const SparseMatrix& X) {
  const std::size_t n = X.rows();
  const std::size_t f = X.cols();
  if (n == 0 || f == 0) return 1.0;
  std::vector<double> sum(f, 0.0);
  std::vector<double> sum_sq(f, 0.0);
  const auto& idx = X.column_indices();
  const auto& val = X.values();
  for (std::size_t k = 0; k < val.size(); ++k) {
    sum[idx[k]] += val[k];
    sum_sq[idx[k]] += val[k] * val[k];
  }
  double total_var = 0.0;
  const double nd = static_cast<double>(n);
  for (std::size_t c = 0; c < f; ++c) {
    const double mean = sum[c] / nd;
    total_var += std::max(0.0, sum_sq[c] / nd - mean * mean);
  }
  // n_features * mean variance is the summed variance.
  return 1.0 / std::max(total_var, 1e-12);
}

SvmModel train_svc(const SparseMatrix& X, std::span<const int> y, const SvmParams& params,
                   std::uint64_t seed, TrainTrace* trace) {
  params.validate();
  if (X.rows() != y.size())
    throw Error(ErrorKind::DimensionMismatch, "SVC: row count differs from label count");
  check_finite(X);
  std::size_t n_pos = 0;
  for (int label : y) {
    if (label != 1 && label != -1) throw Error(ErrorKind::DataFormat, "SVC labels must be +1/-1");
    n_pos += label == 1;
  }
  const std::size_t n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::SingleClass, "SVC needs both classes");

  const double gamma = params.gamma.value_or(auto_gamma(X));
  auto model = train_svc_plain(X, y, params, gamma, seed, trace);
  if (!params.probability) return model;

  // Out-of-fold decisions for calibration, stratified into 3 folds.
  std::vector<double> decisions(y.size());
  if (std::min(n_pos, n_neg) >= 3) {
    Rng rng(seed ^ 0x5bd1e995ULL);
    std::vector<std::size_t> fold_of(y.size());
    std::size_t next = 0;
    for (int cls : {1, -1}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == cls) members.push_back(i);
      rng.shuffle(std::span(members));
      for (auto i : members) fold_of[i] = next++ % 3;
    }
    for (std::size_t fold = 0; fold < 3; ++fold) {
      std::vector<std::size_t> train_rows;
      std::vector<std::size_t> held_rows;
      std::vector<int> train_y;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (fold_of[i] == fold) {
          held_rows.push_back(i);
        } else {
          train_rows.push_back(i);
          train_y.push_back(y[i]);
        }
      }
      const auto sub = train_svc_plain(X.select_rows(train_rows), train_y, params, gamma,
                                       seed + fold + 1, nullptr);
      for (auto i : held_rows) decisions[i] = decision_value(sub, X.row(i));
    }
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) decisions[i] = decision_value(model, X.row(i));
  }
  model.platt = fit_platt(decisions, y);
  return model;
}

SvmModel train_svr(const SparseMatrix& X, std::span<const double> y, const SvmParams& params,
                   std::uint64_t seed, TrainTrace* trace) {
  params.validate();
  if (X.rows() != y.size())
    throw Error(ErrorKind::DimensionMismatch, "SVR: row count differs from target count");
  check_finite(X);
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "SVR target is NaN or inf");
  }
  const std::size_t n = X.rows();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "SVR needs at least one row");
  const double gamma = params.gamma.value_or(auto_gamma(X));
  KernelCache kernel(X, params.kernel, gamma, params.coef0);

  std::vector<double> p(2 * n);
  std::vector<int> signs(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = params.epsilon - y[i];
    signs[i] = 1;
    p[i + n] = params.epsilon + y[i];
    signs[i + n] = -1;
  }
  auto result = solve(kernel, n, p, signs, params.C, params.tol, params.max_iter, seed, trace);
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) coef[i] = result.alpha[i] - result.alpha[i + n];
  if (trace) {
    trace->alpha = result.alpha;
    trace->iterations = result.iterations;
  }
  return assemble(X, coef, result.rho, params, gamma, ModelType::Regressor);
}

std::vector<double> predict_decision(const SvmModel& model, const SparseMatrix& X) {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = decision_value(model, X.row(i));
  return out;
}

std::vector<double> predict_proba(const SvmModel& model, const SparseMatrix& X) {
  if (!model.platt)
    throw Error(ErrorKind::UncalibratedModel, "model was trained without probability calibration");
  auto out = predict_decision(model, X);
  for (double& v : out) v = platt_probability(*model.platt, v);
  return out;
}

std::vector<double> predict_svr(const SvmModel& model, const SparseMatrix& X) {
  return predict_decision(model, X);
}

double platt_probability(const Platt& platt, double decision) {
  const double z = platt.A * decision + platt.B;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

Platt fit_platt(std::span<const double> decisions, std::span<const int> labels, int max_iter) {
  if (decisions.size() != labels.size())
    throw Error(ErrorKind::DimensionMismatch, "Platt: decision and label counts differ");
  double n_pos = 0.0;
  double n_neg = 0.0;
  for (int label : labels) (label > 0 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(ErrorKind::SingleClass, "Platt needs both classes");

  Platt platt{0.0, std::log((n_neg + 1.0) / (n_pos + 1.0))};
  const bool degenerate = std::all_of(decisions.begin(), decisions.end(),
                                      [&](double d) { return d == decisions.front(); });
  if (degenerate) return platt;

  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> target(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) target[i] = labels[i] > 0 ? hi : lo;

  const auto nll = [&](double A, double B) {
    double f = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const double z = decisions[i] * A + B;
      f += z >= 0.0 ? target[i] * z + std::log1p(std::exp(-z))
                    : (target[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  constexpr double kSigma = 1e-12;
  constexpr double kMinStep = 1e-10;
  constexpr double kEps = 1e-8;
  double fval = nll(platt.A, platt.B);
  for (int it = 0; it < max_iter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const double z = decisions[i] * platt.A + platt.B;
      double p, q;  // p = P(y=1), q = 1 - p
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      const double d1 = target[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      const double A = platt.A + step * dA;
      const double B = platt.B + step * dB;
      const double f = nll(A, B);
      if (f < fval + 1e-4 * step * gd) {
        platt = {A, B};
        fval = f;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return platt;
}

nlohmann::ordered_json to_json(const SvmModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "adscreen-svm";
  j["version"] = kFormatVersion;
  j["type"] = model.type == ModelType::Classifier ? "classifier" : "regressor";
  j["params"] = {{"kernel", to_string(model.params.kernel)},
                 {"C", model.params.C},
                 {"gamma", model.params.gamma ? nlohmann::ordered_json(*model.params.gamma)
                                              : nlohmann::ordered_json("auto")},
                 {"coef0", model.params.coef0},
                 {"epsilon", model.params.epsilon},
                 {"tol", model.params.tol},
                 {"max_iter", model.params.max_iter},
                 {"probability", model.params.probability}};
  j["gamma"] = model.gamma;
  j["n_features"] = model.n_features;
  j["bias"] = model.bias;
  auto svs = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < model.support_vectors.rows(); ++s) {
    const auto r = model.support_vectors.row(s);
    svs.push_back({{"indices", std::vector<std::uint32_t>(r.indices.begin(), r.indices.end())},
                   {"values", std::vector<double>(r.values.begin(), r.values.end())}});
  }
  j["support_vectors"] = std::move(svs);
  j["dual_coef"] = model.dual_coef;
  j["platt"] = model.platt ? nlohmann::ordered_json{{"A", model.platt->A}, {"B", model.platt->B}}
                           : nlohmann::ordered_json(nullptr);
  return j;
}

SvmModel svm_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "adscreen-svm" || j.at("version").get<int>() != kFormatVersion)
      throw Error(ErrorKind::DataFormat, "not an adscreen-svm v1 model");
    SvmModel model;
    model.type = j.at("type") == "classifier" ? ModelType::Classifier : ModelType::Regressor;
    const auto& p = j.at("params");
    model.params.kernel = parse_kernel(p.at("kernel").get<std::string>());
    model.params.C = p.at("C").get<double>();
    if (!p.at("gamma").is_string()) model.params.gamma = p.at("gamma").get<double>();
    model.params.coef0 = p.at("coef0").get<double>();
    model.params.epsilon = p.at("epsilon").get<double>();
    model.params.tol = p.at("tol").get<double>();
    model.params.max_iter = p.at("max_iter").get<std::int64_t>();
    model.params.probability = p.at("probability").get<bool>();
    model.gamma = j.at("gamma").get<double>();
    model.n_features = j.at("n_features").get<std::size_t>();
    model.bias = j.at("bias").get<double>();
    model.support_vectors = SparseMatrix(model.n_features);
    for (const auto& sv : j.at("support_vectors")) {
      const auto idx = sv.at("indices").get<std::vector<std::uint32_t>>();
      const auto val = sv.at("values").get<std::vector<double>>();
      model.support_vectors.push_row(idx, val);
    }
    model.dual_coef = j.at("dual_coef").get<std::vector<double>>();
    if (model.dual_coef.size() != model.support_vectors.rows())
      throw Error(ErrorKind::DataFormat, "support vector and coefficient counts differ");
    if (!j.at("platt").is_null())
      model.platt = Platt{j.at("platt").at("A").get<double>(), j.at("platt").at("B").get<double>()};
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad SVM model: ") + e.what());
  }
}

}  // namespace adscreen::svm
