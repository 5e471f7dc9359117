#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dialogcode/codebook.hpp"

namespace dialogcode {

enum class ActionKind { assign, uncoded, go_to, continue_to_next };

struct BranchAction {
  ActionKind kind = ActionKind::continue_to_next;
  CodeSet codes;    // assign only
  int target = 0;   // go_to only

  static BranchAction assign(CodeSet codes) { return {ActionKind::assign, std::move(codes), 0}; }
  static BranchAction uncoded() { return {ActionKind::uncoded, {}, 0}; }
  static BranchAction go_to(int step) { return {ActionKind::go_to, {}, step}; }
  static BranchAction next() { return {ActionKind::continue_to_next, {}, 0}; }

  bool operator==(const BranchAction&) const = default;
};

struct Branch {
  std::string condition;
  BranchAction action;

  bool operator==(const Branch&) const = default;
};

struct Step {
  int number = 0;
  std::string title;
  std::vector<Branch> branches;

  bool operator==(const Step&) const = default;
};

// Ordered coding steps. Valid trees only jump forward, so interpretation
// always terminates.
struct DecisionTree {
  std::vector<Step> steps;

  bool operator==(const DecisionTree&) const = default;
};

enum class TreeIssue {
  step_numbering,       // numbers not 1..n consecutive
  empty_step,
  backward_goto,
  goto_out_of_range,
  unknown_code,
  empty_assign,
  uc_exclusivity,
  continue_in_last_step,
  unreachable_step,     // warning only
};

struct TreeViolation {
  TreeIssue issue;
  int step = 0;                          // 1-based step number
  std::optional<std::size_t> branch;     // 0-based branch index
  std::string message;
};

struct TreeReport {
  std::vector<TreeViolation> violations;
  std::vector<TreeViolation> warnings;

  bool ok() const noexcept { return violations.empty(); }
};

TreeReport validate_decision_tree(const DecisionTree& tree, const Codebook& codebook);

struct TreeOutcome {
  std::vector<int> visited;  // step numbers in visit order
  CodeSet codes;             // empty if the walk fell off the end
};

// Walks a valid tree, asking `choose` which branch to take at each step.
// Throws ValidationError if the tree is invalid or `choose` is out of range.
TreeOutcome walk_decision_tree(const DecisionTree& tree,
                               const std::function<std::size_t(const Step&)>& choose);

// Plain-text rendering used inside instruction documents.
std::string render_decision_tree(const DecisionTree& tree);

// Default CDAS tree: a learning-goal gate (irrelevant turns are UC), then
// invitation codes, then contribution codes.
DecisionTree cdas_decision_tree();

}  // namespace dialogcode
