#include "adbn/rules.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "adbn/error.hpp"

namespace adbn {

void TreeConfig::validate() const {
  if (min_samples_leaf == 0) raise(ErrorKind::Config, "rules.min_samples_leaf must be >= 1");
}

std::size_t DecisionTree::predict(const Vector& x) const {
  if (nodes_.empty()) raise(ErrorKind::State, "decision tree is empty");
  std::size_t i = 0;
  while (!nodes_[i].leaf) {
    const TreeNode& n = nodes_[i];
    if (n.feature >= static_cast<std::size_t>(x.size()))
      raise(ErrorKind::Dimension, fmt::format("tree: input has no feature {}", n.feature));
    i = x[static_cast<Eigen::Index>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes_[i].label;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    if (nodes_[i].leaf) {
      deepest = std::max(deepest, d);
      continue;
    }
    stack.push_back({nodes_[i].left, d + 1});
    stack.push_back({nodes_[i].right, d + 1});
  }
  return deepest;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf; }));
}

double entropy(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

SplitScore score_split(const Matrix& x, const std::vector<std::size_t>& y,
                       const std::vector<std::size_t>& rows, std::size_t feature, double threshold,
                       std::size_t n_classes) {
  std::vector<std::size_t> all(n_classes, 0), left(n_classes, 0), right(n_classes, 0);
  std::size_t n_left = 0;
  for (std::size_t r : rows) {
    ++all[y[r]];
    if (x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(feature)) < threshold) {
      ++left[y[r]];
      ++n_left;
    } else {
      ++right[y[r]];
    }
  }
  SplitScore s;
  const double n = static_cast<double>(rows.size());
  if (rows.empty()) return s;
  const double wl = static_cast<double>(n_left) / n;
  const double wr = 1.0 - wl;
  s.gain = entropy(all) - wl * entropy(left) - wr * entropy(right);
  s.split_info = entropy({n_left, rows.size() - n_left});
  s.gain_ratio = s.split_info > 0.0 ? s.gain / s.split_info : 0.0;
  return s;
}

namespace {

struct Builder {
  const Matrix& x;
  const std::vector<std::size_t>& y;
  const TreeConfig& cfg;
  std::size_t n_classes;
  std::vector<TreeNode> nodes;

  std::size_t majority(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t r : rows) ++counts[y[r]];
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) -
                                    counts.begin());
  }

  std::size_t build(const std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = nodes.size();
    nodes.emplace_back();
    nodes[id].label = majority(rows);
    nodes[id].support = rows.size();

    const bool pure = std::all_of(rows.begin(), rows.end(),
                                  [&](std::size_t r) { return y[r] == y[rows.front()]; });
    if (pure || depth >= cfg.max_depth || rows.size() < 2 * cfg.min_samples_leaf) return id;

    double best_ratio = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::vector<double> values;
      values.reserve(rows.size());
      for (std::size_t r : rows) values.push_back(x(static_cast<Eigen::Index>(r), f));
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        const double threshold = 0.5 * (values[t] + values[t + 1]);
        std::size_t n_left = 0;
        for (std::size_t r : rows)
          if (x(static_cast<Eigen::Index>(r), f) < threshold) ++n_left;
        if (n_left < cfg.min_samples_leaf || rows.size() - n_left < cfg.min_samples_leaf) continue;
        const SplitScore s =
            score_split(x, y, rows, static_cast<std::size_t>(f), threshold, n_classes);
        if (!(s.gain > 0.0)) continue;
        if (!found || s.gain_ratio > best_ratio) {
          found = true;
          best_ratio = s.gain_ratio;
          best_feature = static_cast<std::size_t>(f);
          best_threshold = threshold;
        }
      }
    }
    if (!found) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(best_feature)) < best_threshold
           ? left
           : right)
          .push_back(r);
    const std::size_t l = build(left, depth + 1);
    const std::size_t rr = build(right, depth + 1);
    TreeNode& n = nodes[id];
    n.leaf = false;
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = l;
    n.right = rr;
    return id;
  }
};

}  // namespace

DecisionTree c45_build(const Matrix& x, const std::vector<std::size_t>& y, const TreeConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) raise(ErrorKind::InvalidArgument, "c45_build: empty data");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    raise(ErrorKind::Dimension,
          fmt::format("c45_build: {} rows but {} labels", x.rows(), y.size()));
  const std::size_t n_classes = *std::max_element(y.begin(), y.end()) + 1;
  Builder b{x, y, cfg, n_classes, {}};
  std::vector<std::size_t> rows(y.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  b.build(rows, 0);
  return DecisionTree(std::move(b.nodes));
}

double agreement(const DecisionTree& tree, const Matrix& x, const std::vector<std::size_t>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    raise(ErrorKind::Dimension, "agreement: rows and labels differ");
  if (y.empty()) return 0.0;
  std::size_t same = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    if (tree.predict(x.row(r).transpose()) == y[static_cast<std::size_t>(r)]) ++same;
  return static_cast<double>(same) / static_cast<double>(y.size());
}

RuleExtraction extract_rules(const Dbn& m, const Matrix& x, const TreeConfig& cfg) {
  if (x.rows() == 0) raise(ErrorKind::InvalidArgument, "extract_rules: empty data");
  RuleExtraction out;
  out.network_labels = predict_all(m, x);
  out.tree = c45_build(x, out.network_labels, cfg);
  out.fidelity = agreement(out.tree, x, out.network_labels);
  return out;
}

bool Rule::matches(const Vector& x) const {
  for (const Condition& c : conditions) {
    if (c.feature >= static_cast<std::size_t>(x.size()))
      raise(ErrorKind::Dimension, fmt::format("rule: input has no feature {}", c.feature));
    const double v = x[static_cast<Eigen::Index>(c.feature)];
    if (c.at_least ? !(v >= c.threshold) : !(v < c.threshold)) return false;
  }
  return true;
}

std::optional<std::size_t> RuleSet::predict(const Vector& x) const {
  for (const Rule& r : rules)
    if (r.matches(x)) return r.label;
  return std::nullopt;
}

RuleSet tree_to_rules(const DecisionTree& tree) {
  RuleSet set;
  if (tree.nodes().empty()) return set;
  const auto& nodes = tree.nodes();
  // Depth-first, left before right, so rule order follows leaf order.
  std::vector<std::pair<std::size_t, std::vector<Condition>>> stack{{0, {}}};
  while (!stack.empty()) {
    auto [i, path] = std::move(stack.back());
    stack.pop_back();
    const TreeNode& n = nodes[i];
    if (n.leaf) {
      set.rules.push_back({path, n.label, n.support});
      continue;
    }
    auto right = path;
    right.push_back({n.feature, true, n.threshold});
    path.push_back({n.feature, false, n.threshold});
    stack.push_back({n.right, std::move(right)});
    stack.push_back({n.left, std::move(path)});
  }
  return set;
}

std::string tree_to_text(const DecisionTree& tree) {
  std::string out;
  for (const Rule& r : tree_to_rules(tree).rules) {
    out += "IF ";
    if (r.conditions.empty()) out += "TRUE";
    for (std::size_t i = 0; i < r.conditions.size(); ++i) {
      const Condition& c = r.conditions[i];
      if (i > 0) out += " AND ";
      out += fmt::format("f{} {} {:.17g}", c.feature, c.at_least ? ">=" : "<", c.threshold);
    }
    out += fmt::format(" THEN class {} support {}\n", r.label, r.support);
  }
  return out;
}

namespace {

template <typename T>
T parse_number(const std::string& token, std::size_t line_no) {
  T value{};
  const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || p != token.data() + token.size())
    raise(ErrorKind::Format, fmt::format("rules: line {}: bad number '{}'", line_no, token));
  return value;
}

double parse_double(const std::string& token, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size())
    raise(ErrorKind::Format, fmt::format("rules: line {}: bad threshold '{}'", line_no, token));
  return v;
}

}  // namespace

RuleSet parse_rules(const std::string& text) {
  RuleSet set;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok.front().front() == '#') continue;
    auto expect = [&](std::size_t i, const char* word) {
      if (i >= tok.size() || tok[i] != word)
        raise(ErrorKind::Format, fmt::format("rules: line {}: expected '{}'", line_no, word));
    };
    expect(0, "IF");
    Rule rule;
    std::size_t i = 1;
    if (i < tok.size() && tok[i] == "TRUE") {
      ++i;
    } else {
      while (true) {
        if (i + 2 >= tok.size() || tok[i].size() < 2 || tok[i][0] != 'f')
          raise(ErrorKind::Format, fmt::format("rules: line {}: malformed condition", line_no));
        Condition c;
        c.feature = parse_number<std::size_t>(tok[i].substr(1), line_no);
        if (tok[i + 1] == ">=")
          c.at_least = true;
        else if (tok[i + 1] == "<")
          c.at_least = false;
        else
          raise(ErrorKind::Format,
                fmt::format("rules: line {}: unknown comparison '{}'", line_no, tok[i + 1]));
        c.threshold = parse_double(tok[i + 2], line_no);
        rule.conditions.push_back(c);
        i += 3;
        if (i < tok.size() && tok[i] == "AND") {
          ++i;
          continue;
        }
        break;
      }
    }
    expect(i, "THEN");
    expect(i + 1, "class");
    if (i + 2 >= tok.size())
      raise(ErrorKind::Format, fmt::format("rules: line {}: missing class", line_no));
    rule.label = parse_number<std::size_t>(tok[i + 2], line_no);
    i += 3;
    if (i < tok.size()) {
      expect(i, "support");
      if (i + 1 >= tok.size())
        raise(ErrorKind::Format, fmt::format("rules: line {}: missing support", line_no));
      rule.support = parse_number<std::size_t>(tok[i + 1], line_no);
      i += 2;
    }
    if (i != tok.size())
      raise(ErrorKind::Format, fmt::format("rules: line {}: trailing tokens", line_no));
    set.rules.push_back(std::move(rule));
  }
  return set;
}

}  // namespace adbn
