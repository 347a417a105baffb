#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "adbn/dbn.hpp"

namespace adbn {

struct TreeConfig {
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 1;

  void validate() const;
};

struct TreeNode {
  bool leaf = true;
  // internal nodes: x[feature] < threshold goes left, otherwise right
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  // leaves
  std::size_t label = 0;
  std::size_t support = 0;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const { return nodes_.at(0); }

  std::size_t predict(const Vector& x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;

 private:
  std::vector<TreeNode> nodes_;
};

/// Shannon entropy in bits of a class-count histogram.
double entropy(const std::vector<std::size_t>& counts);

struct SplitScore {
  double gain = 0.0;
  double split_info = 0.0;
  double gain_ratio = 0.0;  // 0 when split_info is 0
};

/// Scores the binary split x[feature] < threshold over the given rows.
SplitScore score_split(const Matrix& x, const std::vector<std::size_t>& y,
                       const std::vector<std::size_t>& rows, std::size_t feature, double threshold,
                       std::size_t n_classes);

/// Gain-ratio tree over continuous features. Candidate thresholds are
/// midpoints of consecutive distinct values; ties go to the lowest feature,
/// then the lowest threshold.
DecisionTree c45_build(const Matrix& x, const std::vector<std::size_t>& y, const TreeConfig& cfg);

struct RuleExtraction {
  DecisionTree tree;
  std::vector<std::size_t> network_labels;
  double fidelity = 0.0;  // tree agreement with the network on x
};

/// Labels x with the network and fits a tree to those labels.
RuleExtraction extract_rules(const Dbn& m, const Matrix& x, const TreeConfig& cfg);

double agreement(const DecisionTree& tree, const Matrix& x, const std::vector<std::size_t>& y);

struct Condition {
  std::size_t feature = 0;
  bool at_least = true;  // x >= threshold, otherwise x < threshold
  double threshold = 0.0;
};

struct Rule {
  std::vector<Condition> conditions;  // empty: unconditional
  std::size_t label = 0;
  std::size_t support = 0;

  bool matches(const Vector& x) const;
};

struct RuleSet {
  std::vector<Rule> rules;

  /// Label of the first matching rule.
  std::optional<std::size_t> predict(const Vector& x) const;
};

RuleSet tree_to_rules(const DecisionTree& tree);

/// One line per leaf:
///   IF f<i> >= <t> AND f<j> < <u> THEN class <k> support <n>
///   IF TRUE THEN class <k> support <n>
std::string tree_to_text(const DecisionTree& tree);
RuleSet parse_rules(const std::string& text);

}  // namespace adbn
