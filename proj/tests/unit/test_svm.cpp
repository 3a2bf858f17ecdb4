#include <doctest.h>

#include <cmath>
#include <numeric>

#include "adscreen/error.hpp"
#include "adscreen/rng.hpp"
#include "adscreen/svm.hpp"
#include "svm_audit.hpp"

using namespace adscreen;
using namespace adscreen::svm;

namespace {

SparseMatrix dense(std::vector<std::vector<double>> rows) { return SparseMatrix::from_dense(rows); }

SvmParams rbf(double gamma, double C) {
  SvmParams p;
  p.kernel = Kernel::Rbf;
  p.gamma = gamma;
  p.C = C;
  return p;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an adscreen::Error");
  return ErrorKind::Invariant;
}

}  // namespace

TEST_CASE("kernel identities") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows(2, std::vector<double>(6, 0.0));
    for (auto& r : rows)
      for (auto& v : r)
        if (rng.below(2)) v = rng.normal();
    const auto m = dense(rows);
    const double g = 0.1 + rng.uniform();
    CHECK(kernel_eval(Kernel::Rbf, g, 0.0, m.row(0), m.row(0)) == doctest::Approx(1.0));
    CHECK(kernel_eval(Kernel::Rbf, g, 0.0, m.row(0), m.row(1)) ==
          kernel_eval(Kernel::Rbf, g, 0.0, m.row(1), m.row(0)));
  }
  const auto ortho = dense({{1.0, 0.0}, {0.0, 2.0}});
  CHECK(kernel_eval(Kernel::Sigmoid, 1.0, 0.0, ortho.row(0), ortho.row(1)) == 0.0);
}

TEST_CASE("two separable points") {
  const auto X = dense({{0.0}, {1.0}});
  const std::vector<int> y = {-1, 1};
  const auto model = train_svc(X, y, rbf(1.0, 1.0), 0);
  const auto d = predict_decision(model, X);
  CHECK(d[0] < 0.0);
  CHECK(d[1] > 0.0);
}

TEST_CASE("XOR is separable with an rbf kernel") {
  const auto X = dense({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> y = {-1, -1, 1, 1};
  const auto model = train_svc(X, y, rbf(1.0, 10.0), 0);
  const auto d = predict_decision(model, X);
  for (std::size_t i = 0; i < 4; ++i) CHECK(d[i] * y[i] > 0.0);
}

TEST_CASE("degenerate inputs are rejected") {
  const auto X = dense({{0.0}, {1.0}});
  const std::vector<int> same = {1, 1};
  CHECK(kind_of([&] { train_svc(X, same, rbf(1, 1), 0); }) == ErrorKind::SingleClass);
  const auto bad = dense({{std::nan("")}, {1.0}});
  const std::vector<int> y = {-1, 1};
  CHECK(kind_of([&] { train_svc(bad, y, rbf(1, 1), 0); }) == ErrorKind::NonFinite);
}

TEST_CASE("KKT conditions, dual feasibility and monotone dual objective") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.below(30);
    std::vector<std::vector<double>> rows(n, std::vector<double>(4));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = (i % 2 == 0) ? 1 : -1;
      for (auto& v : rows[i]) v = rng.normal() + 0.7 * y[i];
    }
    SvmParams p = rbf(0.1 + rng.uniform(), trial % 3 == 0 ? 0.1 : (trial % 3 == 1 ? 0.5 : 1.0));
    if (trial % 4 == 3) {
      p.kernel = Kernel::Sigmoid;
      p.gamma = 0.05;
    }
    TrainTrace trace;
    trace.record_objective = true;
    const auto X = dense(rows);
    const auto model = train_svc(X, y, p, static_cast<std::uint64_t>(trial), &trace);
    const auto audit = audit_svc(trace.alpha, y, predict_decision(model, X), p.C, 1e-3);
    CHECK(audit.violations == 0);
    CHECK(std::abs(audit.dual_balance) <= 1e-6);
    for (std::size_t k = 1; k < trace.dual_objective.size(); ++k)
      CHECK(trace.dual_objective[k] >= trace.dual_objective[k - 1] - 1e-12);
  }
}

TEST_CASE("identical inputs give identical model bytes") {
  Rng rng(5);
  std::vector<std::vector<double>> rows(30, std::vector<double>(3));
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    y[i] = i < 15 ? 1 : -1;
    for (auto& v : rows[i]) v = rng.normal() + 0.5 * y[i];
  }
  SvmParams p;
  p.probability = true;
  const auto X = dense(rows);
  const auto a = to_json(train_svc(X, y, p, 42)).dump();
  const auto b = to_json(train_svc(X, y, p, 42)).dump();
  CHECK(a == b);
  const auto back = svm_from_json(nlohmann::ordered_json::parse(a));
  CHECK(to_json(back).dump() == a);
}

TEST_CASE("probability output") {
  const Platt mid{-1.0, 0.0};
  CHECK(platt_probability(mid, 0.0) == doctest::Approx(0.5));
  CHECK(platt_probability(mid, 2.5) + platt_probability(mid, -2.5) == doctest::Approx(1.0));
  double prev = 0.0;
  for (double d = -5.0; d <= 5.0; d += 0.25) {
    const double p = platt_probability(mid, d);
    CHECK(p > prev);
    prev = p;
  }

  const auto X = dense({{0.0}, {1.0}});
  const std::vector<int> y = {-1, 1};
  const auto plain = train_svc(X, y, rbf(1, 1), 0);
  CHECK(kind_of([&] { predict_proba(plain, X); }) == ErrorKind::UncalibratedModel);
}

TEST_CASE("Platt fit on separated decisions") {
  const std::vector<double> d = {-1, -1, 1, 1};
  const std::vector<int> y = {-1, -1, 1, 1};
  const auto platt = fit_platt(d, y);
  CHECK(platt.A < 0.0);
  const double lo = platt_probability(platt, -1.0);
  const double hi = platt_probability(platt, 1.0);
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < hi);

  const std::vector<int> flipped = {1, 1, -1, -1};
  const auto rev = fit_platt(d, flipped);
  CHECK(rev.A > 0.0);
  CHECK(platt_probability(rev, -1.0) > platt_probability(rev, 1.0));
}

TEST_CASE("Platt fit with constant decisions falls back to the smoothed prior") {
  const std::vector<double> d = {0.3, 0.3, 0.3, 0.3, 0.3};
  const std::vector<int> y = {1, 1, 1, -1, -1};
  const auto platt = fit_platt(d, y);
  CHECK(platt.A == 0.0);
  for (double x : {-3.0, 0.0, 7.0})
    CHECK(platt_probability(platt, x) == doctest::Approx(4.0 / 7.0));  // (3 + 1) / (5 + 2)
}

TEST_CASE("Platt probabilities from calibrated training are monotone") {
  Rng rng(8);
  std::vector<std::vector<double>> rows(40, std::vector<double>(2));
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = i % 2 ? 1 : -1;
    for (auto& v : rows[i]) v = rng.normal() + y[i];
  }
  SvmParams p = rbf(0.5, 1.0);
  p.probability = true;
  const auto X = dense(rows);
  const auto model = train_svc(X, y, p, 1);
  REQUIRE(model.platt);
  const auto d = predict_decision(model, X);
  const auto prob = predict_proba(model, X);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(prob[i] > 0.0);
    CHECK(prob[i] < 1.0);
    for (std::size_t j = 0; j < 40; ++j)
      if (d[i] < d[j]) CHECK(prob[i] <= prob[j]);
  }
}

TEST_CASE("SVR on a constant target predicts the constant") {
  const auto X = dense({{0.0, 1.0}, {1.0, 0.0}, {2.0, 2.0}});
  const std::vector<double> y = {7.5, 7.5, 7.5};
  const auto model = train_svr(X, y, rbf(0.5, 1.0), 0);
  for (double v : predict_svr(model, X)) CHECK(v == doctest::Approx(7.5).epsilon(1e-6));
}

TEST_CASE("SVR fits collinear points") {
  const auto X = dense({{0.0}, {1.0}, {2.0}});
  const std::vector<double> y = {0.0, 1.0, 2.0};
  SvmParams p = rbf(0.01, 100.0);
  p.epsilon = 0.01;
  p.tol = 1e-6;
  const auto model = train_svr(X, y, p, 0);
  const auto pred = predict_svr(model, X);
  double sse = 0.0;
  for (std::size_t i = 0; i < 3; ++i) sse += (pred[i] - y[i]) * (pred[i] - y[i]);
  CHECK(std::sqrt(sse / 3.0) <= 0.1);
}

TEST_CASE("SVR with a wide tube keeps every coefficient at zero") {
  const auto X = dense({{0.0}, {1.0}, {2.0}});
  const std::vector<double> y = {1.0, 1.2, 1.4};
  SvmParams p = rbf(1.0, 1.0);
  p.epsilon = 1.0;
  TrainTrace trace;
  const auto model = train_svr(X, y, p, 0, &trace);
  for (double a : trace.alpha) CHECK(a == doctest::Approx(0.0));
  for (double v : predict_svr(model, X)) CHECK(v == doctest::Approx(1.2).epsilon(1e-6));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(trace.alpha[i] - trace.alpha[i + 3]) <= p.C);
}

TEST_CASE("auto gamma uses the summed column variance") {
  const auto X = dense({{0.0, 1.0}, {2.0, 1.0}});
  CHECK(auto_gamma(X) == doctest::Approx(1.0));  // variances 1 and 0
  const auto flat = dense({{1.0}, {1.0}});
  CHECK(auto_gamma(flat) == doctest::Approx(1e12));
}
