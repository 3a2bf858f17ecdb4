#pragma once

// Brute-force reference implementations used only by tests. They follow the
// formulas directly and share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

// Dense TF-IDF for corpora whose tokens are lowercase alphanumeric words
// separated by single spaces.
struct DenseTfidf {
  std::vector<std::string> terms;  // column order
  std::vector<double> idf;
  std::vector<std::vector<double>> rows;
};

inline DenseTfidf tfidf(const std::vector<std::string>& corpus, std::size_t max_features,
                        bool sublinear) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& d : corpus) {
    std::istringstream in(d);
    std::vector<std::string> toks;
    for (std::string t; in >> t;) toks.push_back(t);
    docs.push_back(toks);
  }
  std::map<std::string, int> total;
  std::map<std::string, int> df;
  for (const auto& toks : docs) {
    for (const auto& t : toks) total[t]++;
    std::vector<std::string> uniq = toks;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) df[t]++;
  }
  std::vector<std::string> keep;
  for (const auto& [t, c] : total) keep.push_back(t);
  std::stable_sort(keep.begin(), keep.end(),
                   [&](const std::string& a, const std::string& b) { return total[a] > total[b]; });
  if (keep.size() > max_features) keep.resize(max_features);
  std::sort(keep.begin(), keep.end());

  DenseTfidf out;
  out.terms = keep;
  const double n = static_cast<double>(corpus.size());
  for (const auto& t : keep) out.idf.push_back(std::log((1 + n) / (1 + df[t])) + 1);
  for (const auto& toks : docs) {
    std::vector<double> row(keep.size(), 0.0);
    for (std::size_t j = 0; j < keep.size(); ++j) {
      const auto c = static_cast<double>(std::count(toks.begin(), toks.end(), keep[j]));
      if (c == 0) continue;
      row[j] = (sublinear ? 1 + std::log(c) : c) * out.idf[j];
    }
    double norm = 0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& v : row) v /= norm;
    out.rows.push_back(row);
  }
  return out;
}

// Two-label linear-chain CRF scored by enumerating every label path.
// state(y, t) and transition(a, b) supply the potentials.
struct PathEnumeration {
  double log_partition = 0.0;
  std::vector<std::array<double, 2>> marginals;
  std::vector<int> best_path;
  double best_score = 0.0;
};

inline PathEnumeration enumerate_paths(std::size_t length,
                                       const std::function<double(int, std::size_t)>& state,
                                       const std::function<double(int, int)>& transition) {
  PathEnumeration out;
  out.marginals.assign(length, {0.0, 0.0});
  std::vector<double> scores;
  std::vector<std::vector<int>> paths;
  for (std::size_t mask = 0; mask < (std::size_t{1} << length); ++mask) {
    std::vector<int> path(length);
    double s = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      path[t] = static_cast<int>((mask >> t) & 1U);
      s += state(path[t], t);
      if (t > 0) s += transition(path[t - 1], path[t]);
    }
    scores.push_back(s);
    paths.push_back(path);
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - top);
  out.log_partition = top + std::log(z);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const double w = std::exp(scores[p] - out.log_partition);
    for (std::size_t t = 0; t < length; ++t) out.marginals[t][paths[p][t]] += w;
  }
  const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
  out.best_path = paths[static_cast<std::size_t>(best)];
  out.best_score = top;
  return out;
}

// Best split over a dense matrix by exhaustive search of every threshold that
// separates the sorted values of each feature.
struct BruteSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline BruteSplit best_split(const std::vector<std::vector<double>>& X,
                             const std::vector<double>& grad, const std::vector<double>& hess,
                             int min_leaf) {
  BruteSplit best;
  double G = 0, H = 0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    G += grad[i];
    H += hess[i];
  }
  const std::size_t cols = X.empty() ? 0 : X[0].size();
  for (std::size_t f = 0; f < cols; ++f) {
    std::vector<double> values;
    for (const auto& row : X) values.push_back(row[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double thr = 0.5 * (values[k] + values[k + 1]);
      double gl = 0, hl = 0;
      int nl = 0, nr = 0;
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (X[i][f] <= thr) {
          gl += grad[i];
          hl += hess[i];
          ++nl;
        } else {
          ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gr = G - gl, hr = H - hl;
      if (hl <= 0 || hr <= 0) continue;
      const double gain = gl * gl / hl + gr * gr / hr - G * G / H;
      if (gain > best.gain + 1e-12 * std::max(1.0, std::abs(best.gain))) best = {static_cast<int>(f), thr, gain};
    }
  }
  return best;
}

}  // namespace oracle
