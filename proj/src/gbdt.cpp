#include "adscreen/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adscreen/error.hpp"
#include "adscreen/rng.hpp"

namespace adscreen::gbdt {

namespace {

constexpr double kMinGain = 1e-12;
constexpr double kMinHessian = 1e-300;

struct Entry {
  double value;
  double g;
  double h;
};

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double leaf_value(double G, double H) { return H > kMinHessian ? -G / H : 0.0; }

double score(double G, double H) { return H > kMinHessian ? G * G / H : 0.0; }

// Scratch buffers reused across nodes.
struct SplitWorkspace {
  std::vector<std::vector<Entry>> buckets;
  std::vector<int> touched;
};

SplitCandidate find_split(const SparseMatrix& X, std::span<const std::size_t> rows,
                          std::span<const double> grad, std::span<const double> hess,
                          int min_samples_leaf, SplitWorkspace& ws) {
  if (ws.buckets.size() != X.cols()) ws.buckets.assign(X.cols(), {});
  ws.touched.clear();
  double G = 0.0;
  double H = 0.0;
  for (auto r : rows) {
    G += grad[r];
    H += hess[r];
    const auto view = X.row(r);
    for (std::size_t k = 0; k < view.nnz(); ++k) {
      auto& bucket = ws.buckets[view.indices[k]];
      if (bucket.empty()) ws.touched.push_back(static_cast<int>(view.indices[k]));
      bucket.push_back({view.values[k], grad[r], hess[r]});
    }
  }
  std::sort(ws.touched.begin(), ws.touched.end());

  const double parent = score(G, H);
  const auto n_node = static_cast<std::ptrdiff_t>(rows.size());
  SplitCandidate best;

  for (int feature : ws.touched) {
    auto& entries = ws.buckets[static_cast<std::size_t>(feature)];
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });
    double Gnz = 0.0;
    double Hnz = 0.0;
    for (const auto& e : entries) {
      Gnz += e.g;
      Hnz += e.h;
    }
    const auto n_zero = n_node - static_cast<std::ptrdiff_t>(entries.size());
    Entry zero_group{0.0, G - Gnz, H - Hnz};

    double GL = 0.0;
    double HL = 0.0;
    std::ptrdiff_t nL = 0;
    bool zero_done = n_zero == 0;
    double prev_value = 0.0;
    bool have_prev = false;

    // Walks value groups in ascending order, inserting the implicit-zero group
    // at its sorted position, and scores the cut before each new value.
    const auto visit = [&](double value, double g, double h, std::ptrdiff_t count) {
      if (have_prev && value > prev_value) {
        const auto nR = n_node - nL;
        if (nL >= min_samples_leaf && nR >= min_samples_leaf) {
          const double gain = score(GL, HL) + score(G - GL, H - HL) - parent;
          // Gains equal up to rounding (the same partition reached through
          // another feature) keep the earlier candidate.
          if (gain > kMinGain && gain > best.gain + 1e-12 * std::max(1.0, std::abs(best.gain))) {
            best.feature = feature;
            best.threshold = 0.5 * (prev_value + value);
            best.gain = gain;
          }
        }
      }
      GL += g;
      HL += h;
      nL += count;
      prev_value = value;
      have_prev = true;
    };

    for (const auto& e : entries) {
      if (!zero_done && e.value > 0.0) {
        visit(0.0, zero_group.g, zero_group.h, n_zero);
        zero_done = true;
      }
      visit(e.value, e.g, e.h, 1);
    }
    if (!zero_done) visit(0.0, zero_group.g, zero_group.h, n_zero);
    entries.clear();
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const SparseMatrix& X, std::span<const double> grad, std::span<const double> hess,
              const GbdtParams& params)
      : X_(X), grad_(grad), hess_(hess), params_(params) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::size_t> rows, int depth) {
    double G = 0.0;
    double H = 0.0;
    for (auto r : rows) {
      G += grad_[r];
      H += hess_[r];
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    tree.nodes[id].value = leaf_value(G, H);
    if (depth >= params_.max_depth || rows.size() < 2) return id;

    const auto split = find_split(X_, rows, grad_, hess_, params_.min_samples_leaf, ws_);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : rows) {
      (X_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right)
          .push_back(r);
    }
    rows = {};
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    tree.nodes[id].gain = split.gain;
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  const SparseMatrix& X_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbdtParams& params_;
  SplitWorkspace ws_;
};

void derivatives(Loss loss, std::span<const double> y, std::span<const double> margin,
                 std::vector<double>& grad, std::vector<double>& hess) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (loss == Loss::Squared) {
      grad[i] = margin[i] - y[i];
      hess[i] = 1.0;
    } else {
      const double p = sigmoid(margin[i]);
      grad[i] = p - y[i];
      hess[i] = p * (1.0 - p);
    }
  }
}

nlohmann::ordered_json node_to_json(const Tree& tree, int id) {
  const auto& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.feature < 0) return {{"leaf", node.value}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"gain", node.gain},
          {"value", node.value},
          {"left", node_to_json(tree, node.left)},
          {"right", node_to_json(tree, node.right)}};
}

int node_from_json(Tree& tree, const nlohmann::ordered_json& j) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{});
  if (j.contains("leaf")) {
    tree.nodes[id].value = j.at("leaf").get<double>();
    return id;
  }
  tree.nodes[id].feature = j.at("feature").get<int>();
  tree.nodes[id].threshold = j.at("threshold").get<double>();
  tree.nodes[id].gain = j.at("gain").get<double>();
  tree.nodes[id].value = j.at("value").get<double>();
  const int l = node_from_json(tree, j.at("left"));
  const int r = node_from_json(tree, j.at("right"));
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return id;
}

}  // namespace

std::string_view to_string(Loss loss) { return loss == Loss::Logistic ? "logistic" : "squared"; }

void GbdtParams::validate() const {
  if (n_estimators < 0) throw Error(ErrorKind::Config, "n_estimators must be >= 0");
  if (max_depth < 0) throw Error(ErrorKind::Config, "max_depth must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning_rate must be positive");
  if (min_samples_leaf < 1) throw Error(ErrorKind::Config, "min_samples_leaf must be >= 1");
  if (!(subsample > 0.0 && subsample <= 1.0))
    throw Error(ErrorKind::Config, "subsample must lie in (0, 1]");
}

double Tree::predict(const SparseRow& x) const {
  if (nodes.empty()) return 0.0;
  std::size_t id = 0;
  while (nodes[id].feature >= 0) {
    const auto f = static_cast<std::uint32_t>(nodes[id].feature);
    const auto it = std::lower_bound(x.indices.begin(), x.indices.end(), f);
    const double v = (it != x.indices.end() && *it == f)
                         ? x.values[static_cast<std::size_t>(it - x.indices.begin())]
                         : 0.0;
    id = static_cast<std::size_t>(v <= nodes[id].threshold ? nodes[id].left : nodes[id].right);
  }
  return nodes[id].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& node = nodes[static_cast<std::size_t>(id)];
    if (node.feature >= 0) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

SplitCandidate best_split(const SparseMatrix& X, std::span<const std::size_t> rows,
                          std::span<const double> grad, std::span<const double> hess,
                          int min_samples_leaf) {
  SplitWorkspace ws;
  return find_split(X, rows, grad, hess, min_samples_leaf, ws);
}

double mean_loss(Loss loss, std::span<const double> y, std::span<const double> margins) {
  if (y.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = margins[i];
    if (loss == Loss::Squared) {
      total += 0.5 * (m - y[i]) * (m - y[i]);
    } else {
      // log(1 + exp(m)) - y m, computed without overflow.
      total += (m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m))) - y[i] * m;
    }
  }
  return total / static_cast<double>(y.size());
}

GbdtModel train_gbdt(const SparseMatrix& X, std::span<const double> y, Loss loss,
                     const GbdtParams& params, std::vector<double>* stage_losses) {
  params.validate();
  if (X.rows() != y.size())
    throw Error(ErrorKind::DimensionMismatch, "GBDT: row count differs from target count");
  if (y.empty()) throw Error(ErrorKind::DimensionMismatch, "GBDT needs at least one row");
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "GBDT target is NaN or inf");
  }
  for (double v : X.values()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "GBDT feature is NaN or inf");
  }
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  GbdtModel model;
  model.loss = loss;
  model.params = params;
  model.n_features = X.cols();
  if (loss == Loss::Logistic) {
    for (double v : y) {
      if (v != 0.0 && v != 1.0) throw Error(ErrorKind::DataFormat, "logistic GBDT needs y in {0,1}");
    }
    if (mean == 0.0 || mean == 1.0) throw Error(ErrorKind::SingleClass, "GBDT needs both classes");
    model.base_score = std::log(mean / (1.0 - mean));
  } else {
    model.base_score = mean;
  }

  const std::size_t n = y.size();
  std::vector<double> margin(n, model.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  if (stage_losses) stage_losses->assign(1, mean_loss(loss, y, margin));

  Rng rng(params.seed);
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const auto sample_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * n)));

  for (int stage = 0; stage < params.n_estimators; ++stage) {
    derivatives(loss, y, margin, grad, hess);
    std::vector<std::size_t> rows = all_rows;
    if (sample_size < n) {
      rng.shuffle(std::span(rows));
      rows.resize(sample_size);
      std::sort(rows.begin(), rows.end());
    }
    TreeBuilder builder(X, grad, hess, params);
    auto tree = builder.build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) margin[i] += params.learning_rate * tree.predict(X.row(i));
    model.trees.push_back(std::move(tree));
    if (stage_losses) stage_losses->push_back(mean_loss(loss, y, margin));
  }
  return model;
}

std::vector<double> predict_margin(const GbdtModel& model, const SparseMatrix& X) {
  std::vector<double> out(X.rows(), model.base_score);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto x = X.row(i);
    for (const auto& tree : model.trees) out[i] += model.params.learning_rate * tree.predict(x);
  }
  return out;
}

std::vector<double> predict_gbdt(const GbdtModel& model, const SparseMatrix& X) {
  auto out = predict_margin(model, X);
  if (model.loss == Loss::Logistic) {
    for (double& v : out) v = sigmoid(v);
  }
  return out;
}

std::map<int, double> feature_importance(const GbdtModel& model) {
  std::map<int, double> importance;
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) importance[node.feature] += node.gain;
    }
  }
  return importance;
}

nlohmann::ordered_json to_json(const GbdtModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "adscreen-gbdt";
  j["version"] = 1;
  j["loss"] = to_string(model.loss);
  j["params"] = {{"n_estimators", model.params.n_estimators},
                 {"max_depth", model.params.max_depth},
                 {"learning_rate", model.params.learning_rate},
                 {"min_samples_leaf", model.params.min_samples_leaf},
                 {"subsample", model.params.subsample},
                 {"seed", model.params.seed}};
  j["n_features"] = model.n_features;
  j["base_score"] = model.base_score;
  auto trees = nlohmann::ordered_json::array();
  for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
  j["trees"] = std::move(trees);
  return j;
}

GbdtModel gbdt_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "adscreen-gbdt") throw Error(ErrorKind::DataFormat, "not a GBDT model");
    GbdtModel model;
    model.loss = j.at("loss") == "logistic" ? Loss::Logistic : Loss::Squared;
    const auto& p = j.at("params");
    model.params.n_estimators = p.at("n_estimators").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    model.params.subsample = p.at("subsample").get<double>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.n_features = j.at("n_features").get<std::size_t>();
    model.base_score = j.at("base_score").get<double>();
    for (const auto& t : j.at("trees")) {
      Tree tree;
      node_from_json(tree, t);
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataFormat, std::string("bad GBDT model: ") + e.what());
  }
}

}  // namespace adscreen::gbdt
