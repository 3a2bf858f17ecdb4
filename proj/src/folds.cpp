#include "adscreen/folds.hpp"

#include <algorithm>
#include <map>

#include "adscreen/error.hpp"
#include "adscreen/rng.hpp"

namespace adscreen::eval {

std::string_view to_string(FoldStrategy strategy) {
  return strategy == FoldStrategy::Stratified ? "stratified" : "grouped";
}

FoldStrategy parse_fold_strategy(std::string_view name) {
  if (name == "stratified") return FoldStrategy::Stratified;
  if (name == "grouped" || name == "grouped-by-transcript") return FoldStrategy::Grouped;
  throw Error(ErrorKind::Config, "fold strategy must be stratified or grouped, got '" +
                                     std::string(name) + "'");
}

std::vector<Fold> make_folds(std::span<const int> labels, std::span<const std::string> groups,
                             const FoldSpec& spec) {
  if (spec.k < 2) throw Error(ErrorKind::Config, "k-fold needs k >= 2");
  const auto k = static_cast<std::size_t>(spec.k);
  const std::size_t n = labels.size();
  Rng rng(spec.seed);

  // Units are single rows (stratified) or whole groups (grouped).
  std::vector<std::vector<std::size_t>> units;
  std::vector<int> unit_label;
  if (spec.strategy == FoldStrategy::Grouped) {
    if (groups.size() != n)
      throw Error(ErrorKind::DimensionMismatch, "grouped folds need a group key on every row");
    std::map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = unit_of.emplace(groups[i], units.size());
      if (inserted) {
        units.emplace_back();
        unit_label.push_back(labels[i]);
      }
      units[it->second].push_back(i);
    }
    if (units.size() < k)
      throw Error(ErrorKind::TooFewGroups, "k=" + std::to_string(k) + " exceeds the " +
                                               std::to_string(units.size()) + " available groups");
  } else {
    if (n < k)
      throw Error(ErrorKind::TooFewGroups,
                  "k=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i) {
      units.push_back({i});
      unit_label.push_back(labels[i]);
    }
  }

  std::vector<int> classes(unit_label.begin(), unit_label.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<std::size_t> fold_of_unit(units.size());
  std::size_t next = 0;
  for (int cls : classes) {
    std::vector<std::size_t> members;
    for (std::size_t u = 0; u < units.size(); ++u)
      if (unit_label[u] == cls) members.push_back(u);
    rng.shuffle(std::span(members));
    for (auto u : members) fold_of_unit[u] = next++ % k;
  }

  std::vector<Fold> folds(k);
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t f = 0; f < k; ++f) {
      auto& side = (f == fold_of_unit[u]) ? folds[f].valid : folds[f].train;
      side.insert(side.end(), units[u].begin(), units[u].end());
    }
  }
  for (auto& fold : folds) {
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.valid.begin(), fold.valid.end());
  }
  return folds;
}

}  // namespace adscreen::eval
