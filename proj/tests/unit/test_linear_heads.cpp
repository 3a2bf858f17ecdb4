#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "adscreen/error.hpp"
#include "adscreen/linear_heads.hpp"
#include "adscreen/rng.hpp"

using namespace adscreen;
using namespace adscreen::linear;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an adscreen::Error");
  return ErrorKind::Invariant;
}

Eigen::MatrixXd random_matrix(Rng& rng, int n, int h) {
  Eigen::MatrixXd X(n, h);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < h; ++j) X(i, j) = rng.normal();
  return X;
}

}  // namespace

TEST_CASE("embedding CSV parsing") {
  const auto m = parse_embeddings_csv("id,e0,e1,e2,e3\na,1,2,3,4\nb,0,0,0,0\nc,-1,0.5,2e-3,7\n");
  CHECK(m.rows() == 3);
  CHECK(m.dim() == 4);
  CHECK(m.values(2, 2) == doctest::Approx(0.002));
  CHECK(kind_of([] { parse_embeddings_csv("id,e0,e1,e2,e3\na,1,2,3\n"); }) ==
        ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { parse_embeddings_csv("id,e0\na,nan\n"); }) == ErrorKind::NonFinite);
  CHECK(kind_of([] { parse_embeddings_csv("id,e0\na,1\na,2\n"); }) != ErrorKind::Invariant);
}

TEST_CASE("alignment names unknown and missing ids") {
  const auto m = parse_embeddings_csv("id,e0\na,1\nb,2\nz,3\n");
  const std::vector<std::string> ids = {"b", "a"};
  try {
    align_embeddings(m, ids);
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownId);
    CHECK(std::string(e.what()).find("z") != std::string::npos);
  }
  const std::vector<std::string> all = {"z", "b", "a"};
  const auto aligned = align_embeddings(m, all);
  CHECK(aligned.ids == all);
  CHECK(aligned.values(0, 0) == 3.0);
  const std::vector<std::string> extra = {"z", "b", "a", "q"};
  CHECK(kind_of([&] { align_embeddings(m, extra); }) == ErrorKind::UnknownId);
}

TEST_CASE("embedding files with a sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "adscreen_embed_test";
  std::filesystem::create_directories(dir);
  const auto csv = dir / "emb.csv";
  std::ofstream(csv) << "id,e0,e1\nt1,0.1,0.2\nt2,0.3,0.4\n";
  std::ofstream(dir / "emb.json") << R"({"model_name":"m","pooling":"mean","layer":"-1","H":2})";
  const auto m = load_embeddings(csv.string());
  REQUIRE(m.provenance);
  CHECK(m.provenance->pooling == "mean");
  std::ofstream(dir / "emb.json") << R"({"model_name":"m","pooling":"mean","layer":"-1","H":3})";
  CHECK(kind_of([&] { load_embeddings(csv.string()); }) == ErrorKind::DimensionMismatch);
  std::filesystem::remove_all(dir);
}

TEST_CASE("logistic objective gradient matches finite differences") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const auto Z = random_matrix(rng, 15, 4);
    std::vector<double> y(15);
    for (auto& v : y) v = static_cast<double>(rng.below(2));
    Eigen::VectorXd w(4);
    for (int j = 0; j < 4; ++j) w(j) = rng.normal();
    const double b = rng.normal();
    Eigen::VectorXd gw;
    double gb = 0.0;
    logistic_objective(Z, y, 0.05, w, b, &gw, &gb);
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      wp(j) += h;
      wm(j) -= h;
      const double fd = (logistic_objective(Z, y, 0.05, wp, b) - logistic_objective(Z, y, 0.05, wm, b)) / (2 * h);
      CHECK(std::abs(gw(j) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
    const double fdb = (logistic_objective(Z, y, 0.05, w, b + h) - logistic_objective(Z, y, 0.05, w, b - h)) / (2 * h);
    CHECK(std::abs(gb - fdb) <= 1e-5 * std::max(1.0, std::abs(fdb)));
  }
}

TEST_CASE("logistic head separates blobs and shrinks under heavy penalty") {
  Rng rng(43);
  Eigen::MatrixXd X(40, 2);
  std::vector<double> y(40);
  for (int i = 0; i < 40; ++i) {
    y[i] = i < 10 ? 1.0 : 0.0;
    X(i, 0) = rng.normal() * 0.3 + (y[i] ? 2.0 : -2.0);
    X(i, 1) = rng.normal() * 0.3;
  }
  const auto model = train_logistic(X, y, 1e-4);
  const auto p = predict(model, X);
  for (int i = 0; i < 40; ++i) CHECK((p(i) > 0.5) == (y[i] == 1.0));

  const auto flat = train_logistic(X, y, 1e8);
  CHECK(flat.weights.norm() < 1e-6);
  for (int i = 0; i < 40; ++i) CHECK(predict(flat, X)(i) == doctest::Approx(0.25).epsilon(1e-4));

  LinearModel zero;
  zero.weights = Eigen::VectorXd::Zero(2);
  zero.feature_mean = Eigen::VectorXd::Zero(2);
  zero.feature_scale = Eigen::VectorXd::Ones(2);
  for (int i = 0; i < 40; ++i) CHECK(predict(zero, X)(i) == doctest::Approx(0.5));
}

TEST_CASE("LASSO null threshold") {
  Rng rng(47);
  const auto X = random_matrix(rng, 30, 5);
  std::vector<double> y(30);
  for (int i = 0; i < 30; ++i) y[i] = X(i, 0) - 2 * X(i, 3) + rng.normal();
  const auto st = Standardizer::fit(X);
  const auto Z = st.apply(X);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), 30);
  const Eigen::VectorXd centred = yv.array() - yv.mean();
  const double threshold = (Z.transpose() * centred).cwiseAbs().maxCoeff() / 30.0;

  const auto off = train_lasso(X, y, threshold * (1 + 1e-9));
  CHECK(off.weights.cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 30; ++i) CHECK(predict(off, X)(i) == doctest::Approx(yv.mean()));
  const auto on = train_lasso(X, y, threshold * 0.99);
  CHECK(on.weights.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("LASSO recovers a noiseless slope") {
  Rng rng(53);
  const auto X = random_matrix(rng, 50, 3);
  std::vector<double> y(50);
  for (int i = 0; i < 50; ++i) y[i] = 2 * X(i, 0);
  const auto model = train_lasso(X, y, 1e-6);
  const auto raw = model.raw_weights();
  CHECK(std::abs(raw(0) - 2.0) <= 1e-3);
  CHECK(std::abs(raw(1)) <= 1e-3);
  CHECK(std::abs(raw(2)) <= 1e-3);
}

TEST_CASE("LASSO solutions satisfy the subgradient conditions") {
  Rng rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    const auto X = random_matrix(rng, 40, 6);
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) y[i] = X(i, 1) + 0.5 * X(i, 4) + 0.5 * rng.normal();
    const double alpha = 0.02 + 0.1 * trial / 10.0;
    const auto model = train_lasso(X, y, alpha);
    Eigen::MatrixXd Z = X;
    for (int j = 0; j < 6; ++j)
      Z.col(j) = (X.col(j).array() - model.feature_mean(j)) / model.feature_scale(j);
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), 40);
    const Eigen::VectorXd r = yv - Z * model.weights - Eigen::VectorXd::Constant(40, model.bias);
    CHECK(std::abs(r.mean()) <= 1e-8);
    for (int j = 0; j < 6; ++j) {
      const double corr = Z.col(j).dot(r) / 40.0;
      if (model.weights(j) == 0.0)
        CHECK(std::abs(corr) <= alpha + 1e-6);
      else
        CHECK(std::abs(corr - alpha * (model.weights(j) > 0 ? 1.0 : -1.0)) <= 1e-6);
    }
  }
}

TEST_CASE("LASSO sparsity grows with alpha and constant targets give the constant") {
  Rng rng(61);
  const auto X = random_matrix(rng, 40, 8);
  std::vector<double> y(40);
  for (int i = 0; i < 40; ++i) y[i] = X.row(i).sum() + rng.normal();
  long prev = -1;
  for (double a : {1e-4, 1e-2, 0.1, 0.5, 1.0, 5.0}) {
    const long zeros = (train_lasso(X, y, a).weights.array() == 0.0).count();
    CHECK(zeros >= prev);
    prev = zeros;
  }
  const std::vector<double> c(40, 23.0);
  const auto model = train_lasso(X, c, 0.01);
  CHECK(model.weights.cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.bias == doctest::Approx(23.0));
}

TEST_CASE("predictions are invariant to affine rescaling of a feature") {
  Rng rng(67);
  const auto X = random_matrix(rng, 30, 3);
  std::vector<double> yc(30), yr(30);
  for (int i = 0; i < 30; ++i) {
    yr[i] = X(i, 0) - X(i, 2) + 0.3 * rng.normal();
    yc[i] = yr[i] > 0 ? 1.0 : 0.0;
  }
  Eigen::MatrixXd S = X;
  S.col(1) = 1000.0 * S.col(1).array() + 7.0;
  S.col(2) = -0.01 * S.col(2).array() - 3.0;
  CHECK((predict(train_logistic(X, yc, 0.01), X) - predict(train_logistic(S, yc, 0.01), S))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
  CHECK((predict(train_lasso(X, yr, 0.05), X) - predict(train_lasso(S, yr, 0.05), S))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
}

TEST_CASE("linear model JSON round trip") {
  Rng rng(71);
  const auto X = random_matrix(rng, 20, 3);
  std::vector<double> y(20);
  for (int i = 0; i < 20; ++i) y[i] = X(i, 0);
  const auto model = train_lasso(X, y, 0.01);
  const auto back = linear_from_json(to_json(model));
  CHECK(to_json(back).dump() == to_json(model).dump());
}
