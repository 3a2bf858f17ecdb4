#include "adscreen/linear_heads.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <set>
#include <unordered_map>

#include "adscreen/error.hpp"
#include "adscreen/io.hpp"

namespace adscreen::linear {

namespace {

constexpr double kGradTol = 1e-6;
constexpr double kCoordTol = 1e-8;

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    const auto comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(begin));
      return out;
    }
    out.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
}

double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd to_vector(std::span<const double> y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

void check_inputs(const Eigen::MatrixXd& X, std::span<const double> y) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw Error(ErrorKind::DimensionMismatch, "linear head: row count differs from target count");
  if (X.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "linear head needs at least one row");
  if (!X.allFinite()) throw Error(ErrorKind::NonFinite, "linear head features contain NaN or inf");
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "linear head target is NaN or inf");
  }
}

}  // namespace

EmbeddingMatrix parse_embeddings_csv(std::string_view csv) {
  std::vector<std::string_view> lines;
  std::size_t begin = 0;
  while (begin < csv.size()) {
    auto nl = csv.find('\n', begin);
    if (nl == std::string_view::npos) nl = csv.size();
    auto line = csv.substr(begin, nl - begin);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    begin = nl + 1;
  }
  if (lines.empty()) throw Error(ErrorKind::DataFormat, "embedding CSV is empty");

  const auto header = split_commas(lines.front());
  if (header.size() < 2 || header.front() != "id")
    throw Error(ErrorKind::DataFormat, "embedding CSV header must start with id,e0");
  const std::size_t H = header.size() - 1;
  for (std::size_t k = 0; k < H; ++k) {
    if (header[k + 1] != "e" + std::to_string(k))
      throw Error(ErrorKind::DataFormat, "embedding CSV header column " + std::to_string(k + 1) +
                                             " should be e" + std::to_string(k));
  }

  EmbeddingMatrix m;
  m.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(H));
  std::set<std::string> seen;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_commas(lines[r]);
    if (fields.size() != H + 1)
      throw Error(ErrorKind::DimensionMismatch, "embedding row " + std::to_string(r) + " has " +
                                                    std::to_string(fields.size() - 1) +
                                                    " values, header declares " + std::to_string(H));
    std::string id(fields.front());
    if (!seen.insert(id).second) throw Error(ErrorKind::DataFormat, "duplicate embedding id '" + id + "'");
    for (std::size_t k = 0; k < H; ++k) {
      double v = 0.0;
      const auto f = fields[k + 1];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size())
        throw Error(ErrorKind::DataFormat, "embedding value '" + std::string(f) + "' for id '" + id +
                                               "' is not a number");
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFinite, "embedding for id '" + id + "' has NaN or inf");
      m.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(k)) = v;
    }
    m.ids.push_back(std::move(id));
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  auto m = parse_embeddings_csv(io::read_text_file(path));
  auto sidecar = std::filesystem::path(path).replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    try {
      const auto j = nlohmann::json::parse(io::read_text_file(sidecar.string()));
      const auto H = j.at("H").get<std::size_t>();
      if (H != m.dim())
        throw Error(ErrorKind::DimensionMismatch, "sidecar declares H=" + std::to_string(H) +
                                                      " but CSV rows have " + std::to_string(m.dim()));
      m.provenance = EmbeddingProvenance{j.at("model_name").get<std::string>(),
                                         j.at("pooling").get<std::string>(),
                                         j.at("layer").is_string() ? j.at("layer").get<std::string>()
                                                                   : j.at("layer").dump()};
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::DataFormat, std::string("bad embedding sidecar: ") + e.what());
    }
  }
  return m;
}

EmbeddingMatrix align_embeddings(const EmbeddingMatrix& matrix,
                                 std::span<const std::string> dataset_ids) {
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < matrix.ids.size(); ++i)
    row_of.emplace(matrix.ids[i], static_cast<Eigen::Index>(i));
  const std::set<std::string> wanted(dataset_ids.begin(), dataset_ids.end());

  std::string unknown;
  for (const auto& id : matrix.ids) {
    if (!wanted.contains(id)) unknown += (unknown.empty() ? "" : ", ") + id;
  }
  if (!unknown.empty())
    throw Error(ErrorKind::UnknownId, "embedding ids not in dataset: " + unknown);
  std::string missing;
  for (const auto& id : dataset_ids) {
    if (!row_of.contains(id)) missing += (missing.empty() ? "" : ", ") + id;
  }
  if (!missing.empty())
    throw Error(ErrorKind::UnknownId, "dataset ids without embeddings: " + missing);

  EmbeddingMatrix out;
  out.provenance = matrix.provenance;
  out.values.resize(static_cast<Eigen::Index>(dataset_ids.size()), matrix.values.cols());
  for (std::size_t i = 0; i < dataset_ids.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = matrix.values.row(row_of.at(dataset_ids[i]));
    out.ids.push_back(dataset_ids[i]);
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double var = (X.col(c).array() - s.mean(c)).square().mean();
    const double sd = std::sqrt(var);
    s.scale(c) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(c))) ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd Z = X.rowwise() - mean.transpose();
  return Z.array().rowwise() / scale.transpose().array();
}

Eigen::VectorXd LinearModel::raw_weights() const {
  return weights.array() / feature_scale.array();
}

double LinearModel::raw_bias() const {
  return bias - (weights.array() * feature_mean.array() / feature_scale.array()).sum();
}

double logistic_objective(const Eigen::MatrixXd& Z, std::span<const double> y, double l2_lambda,
                          const Eigen::VectorXd& w, double b, Eigen::VectorXd* grad_w,
                          double* grad_b) {
  const double n = static_cast<double>(Z.rows());
  const Eigen::VectorXd z = (Z * w).array() + b;
  double loss = 0.0;
  Eigen::VectorXd resid(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    loss += log1p_exp(z(i)) - yi * z(i);
    resid(i) = sigmoid(z(i)) - yi;
  }
  if (grad_w) *grad_w = Z.transpose() * resid / n + 2.0 * l2_lambda * w;
  if (grad_b) *grad_b = resid.sum() / n;
  return loss / n + l2_lambda * w.squaredNorm();
}

LinearModel train_logistic(const Eigen::MatrixXd& X, std::span<const double> y, double l2_lambda,
                           std::uint64_t /*seed*/) {
  check_inputs(X, y);
  if (!(l2_lambda >= 0.0)) throw Error(ErrorKind::Config, "l2_lambda must be >= 0");
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw Error(ErrorKind::DataFormat, "logistic head needs y in {0,1}");
  }
  const auto standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Z = standardizer.apply(X);
  const Eigen::Index H = Z.cols();
  const double n = static_cast<double>(Z.rows());

  Eigen::VectorXd w = Eigen::VectorXd::Zero(H);
  double b = 0.0;
  Eigen::VectorXd gw;
  double gb = 0.0;
  double f = logistic_objective(Z, y, l2_lambda, w, b, &gw, &gb);

  // Newton-CG: the Hessian is only touched through products.
  for (int outer = 0; outer < 200; ++outer) {
    const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (gnorm < kGradTol) break;
    const Eigen::VectorXd z = (Z * w).array() + b;
    Eigen::VectorXd d(Z.rows());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      const double p = sigmoid(z(i));
      d(i) = std::max(p * (1.0 - p), 1e-12);
    }
    const auto hess_vec = [&](const Eigen::VectorXd& vw, double vb, Eigen::VectorXd& out_w,
                              double& out_b) {
      const Eigen::VectorXd u = (d.array() * ((Z * vw).array() + vb)).matrix();
      out_w = Z.transpose() * u / n + 2.0 * l2_lambda * vw;
      out_b = u.sum() / n;
    };

    // Conjugate gradients on H p = -g.
    Eigen::VectorXd pw = Eigen::VectorXd::Zero(H);
    double pb = 0.0;
    Eigen::VectorXd rw = -gw;
    double rb = -gb;
    Eigen::VectorXd sw = rw;
    double sb = rb;
    double rr = rw.squaredNorm() + rb * rb;
    const double cg_tol = std::min(0.1, std::sqrt(gnorm)) * gnorm;
    for (Eigen::Index k = 0; k < 2 * (H + 1); ++k) {
      Eigen::VectorXd hw;
      double hb = 0.0;
      hess_vec(sw, sb, hw, hb);
      const double curvature = sw.dot(hw) + sb * hb;
      if (curvature <= 0.0) break;
      const double a = rr / curvature;
      pw += a * sw;
      pb += a * sb;
      rw -= a * hw;
      rb -= a * hb;
      const double rr_new = rw.squaredNorm() + rb * rb;
      if (std::sqrt(rr_new) <= cg_tol) break;
      sw = rw + (rr_new / rr) * sw;
      sb = rb + (rr_new / rr) * sb;
      rr = rr_new;
    }
    if (pw.squaredNorm() + pb * pb == 0.0) {
      pw = -gw;
      pb = -gb;
    }

    // Armijo backtracking.
    const double slope = gw.dot(pw) + gb * pb;
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      Eigen::VectorXd w_new = w + step * pw;
      const double b_new = b + step * pb;
      Eigen::VectorXd gw_new;
      double gb_new = 0.0;
      const double f_new = logistic_objective(Z, y, l2_lambda, w_new, b_new, &gw_new, &gb_new);
      if (f_new <= f + 1e-4 * step * slope) {
        w = std::move(w_new);
        b = b_new;
        gw = std::move(gw_new);
        gb = gb_new;
        f = f_new;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  LinearModel model;
  model.kind = HeadKind::Logistic;
  model.weights = std::move(w);
  model.bias = b;
  model.regularization = l2_lambda;
  model.feature_mean = standardizer.mean;
  model.feature_scale = standardizer.scale;
  return model;
}

LinearModel train_lasso(const Eigen::MatrixXd& X, std::span<const double> y, double l1_alpha,
                        std::uint64_t /*seed*/, int max_epochs) {
  check_inputs(X, y);
  if (!(l1_alpha >= 0.0)) throw Error(ErrorKind::Config, "l1_alpha must be >= 0");
  const auto standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Z = standardizer.apply(X);
  const Eigen::Index H = Z.cols();
  const double n = static_cast<double>(Z.rows());
  const Eigen::VectorXd target = to_vector(y);
  const double y_mean = target.mean();

  Eigen::VectorXd col_sq(H);
  for (Eigen::Index j = 0; j < H; ++j) col_sq(j) = Z.col(j).squaredNorm() / n;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd resid = target.array() - y_mean;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < H; ++j) {
      if (col_sq(j) <= 0.0) continue;
      const double rho = Z.col(j).dot(resid) / n + col_sq(j) * w(j);
      double w_new = 0.0;
      if (rho > l1_alpha) w_new = (rho - l1_alpha) / col_sq(j);
      else if (rho < -l1_alpha) w_new = (rho + l1_alpha) / col_sq(j);
      const double delta = w_new - w(j);
      if (delta != 0.0) {
        resid -= delta * Z.col(j);
        w(j) = w_new;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < kCoordTol) break;
  }

  LinearModel model;
  model.kind = HeadKind::Lasso;
  model.weights = std::move(w);
  model.bias = y_mean;  // standardised columns are centred
  model.regularization = l1_alpha;
  model.feature_mean = standardizer.mean;
  model.feature_scale = standardizer.scale;
  return model;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.weights.size())
    throw Error(ErrorKind::DimensionMismatch, "linear head expects " +
                                                  std::to_string(model.weights.size()) + " features");
  Eigen::MatrixXd Z = X.rowwise() - model.feature_mean.transpose();
  Z = Z.array().rowwise() / model.feature_scale.transpose().array();
  Eigen::VectorXd out = (Z * model.weights).array() + model.bias;
  if (model.kind == HeadKind::Logistic) out = out.unaryExpr([](double z) { return sigmoid(z); });
  return out;
}

nlohmann::ordered_json to_json(const LinearModel& model) {
  const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json j;
  j["format"] = "adscreen-linear";
  j["version"] = 1;
  j["kind"] = model.kind == HeadKind::Logistic ? "logistic" : "lasso";
  j["regularization"] = model.regularization;
  j["bias"] = model.bias;
  j["weights"] = vec(model.weights);
  j["feature_mean"] = vec(model.feature_mean);
  j["feature_scale"] = vec(model.feature_scale);
  return j;
}

LinearModel linear_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "adscreen-linear") throw Error(ErrorKind::DataFormat, "not a linear model");
    const auto vec = [](const std::vector<double>& v) {
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    LinearModel model;
    model.kind = j.at("kind") == "logistic" ? HeadKind::Logistic : HeadKind::Lasso;
    model.regularization = j.at("regularization").get<double>();
    model.bias = j.at("bias").get<double>();
    model.weights = vec(j.at("weights").get<std::vector<double>>());
    model.feature_mean = vec(j.at("feature_mean").get<std::vector<double>>());
    model.feature_scale = vec(j.at("feature_scale").get<std::vector<double>>());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad linear model: ") + e.what());
  }
}

}  // namespace adscreen::linear
