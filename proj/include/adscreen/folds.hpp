#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adscreen::eval {

enum class FoldStrategy { Stratified, Grouped };

std::string_view to_string(FoldStrategy strategy);
FoldStrategy parse_fold_strategy(std::string_view name);

struct FoldSpec {
  int k = 5;
  FoldStrategy strategy = FoldStrategy::Stratified;
  std::uint64_t seed = 0;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};

// Stratified: rows of each class are shuffled and dealt round-robin, the deal
// continuing across classes, so per-fold class counts differ by at most one.
// Grouped: whole groups are dealt the same way (a group takes the label of its
// first row), so no group straddles train and valid. Index lists are sorted.
std::vector<Fold> make_folds(std::span<const int> labels, std::span<const std::string> groups,
                             const FoldSpec& spec);

}  // namespace adscreen::eval
