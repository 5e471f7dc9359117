#include "dialogcode/decision_tree.hpp"

#include <sstream>

#include "dialogcode/error.hpp"

namespace dialogcode {

TreeReport validate_decision_tree(const DecisionTree& tree, const Codebook& codebook) {
  TreeReport report;
  const int n = static_cast<int>(tree.steps.size());
  const auto add = [&report](TreeIssue issue, int step, std::optional<std::size_t> branch, std::string msg) {
    report.violations.push_back({issue, step, branch, std::move(msg)});
  };

  for (int i = 0; i < n; ++i) {
    const auto& step = tree.steps[static_cast<std::size_t>(i)];
    const int expected = i + 1;
    if (step.number != expected) {
      add(TreeIssue::step_numbering, step.number, std::nullopt,
          "step at position " + std::to_string(expected) + " is numbered " + std::to_string(step.number));
    }
    if (step.branches.empty()) add(TreeIssue::empty_step, step.number, std::nullopt, "step has no branches");

    for (std::size_t b = 0; b < step.branches.size(); ++b) {
      const auto& action = step.branches[b].action;
      switch (action.kind) {
        case ActionKind::go_to:
          if (action.target <= step.number) {
            add(TreeIssue::backward_goto, step.number, b,
                "goto " + std::to_string(action.target) + " from step " + std::to_string(step.number) +
                    " is not forward");
          } else if (action.target > n) {
            add(TreeIssue::goto_out_of_range, step.number, b,
                "goto " + std::to_string(action.target) + " targets a missing step");
          }
          break;
        case ActionKind::assign:
          if (action.codes.empty()) add(TreeIssue::empty_assign, step.number, b, "assign lists no codes");
          for (const auto& code : action.codes) {
            if (!codebook.contains(code)) {
              add(TreeIssue::unknown_code, step.number, b, "assign names unknown code '" + code + "'");
            }
          }
          if (!uc_exclusive(action.codes)) {
            add(TreeIssue::uc_exclusivity, step.number, b, "assign combines UC with other codes");
          }
          break;
        case ActionKind::continue_to_next:
          if (i == n - 1) {
            add(TreeIssue::continue_in_last_step, step.number, b, "last step cannot continue");
          }
          break;
        case ActionKind::uncoded:
          break;
      }
    }
  }

  // Reachability over positions; only meaningful once numbering is sane.
  if (report.ok() && n > 0) {
    std::vector<bool> reachable(static_cast<std::size_t>(n), false);
    reachable[0] = true;
    for (int i = 0; i < n; ++i) {
      if (!reachable[static_cast<std::size_t>(i)]) continue;
      for (const auto& branch : tree.steps[static_cast<std::size_t>(i)].branches) {
        if (branch.action.kind == ActionKind::go_to) reachable[static_cast<std::size_t>(branch.action.target - 1)] = true;
        if (branch.action.kind == ActionKind::continue_to_next) reachable[static_cast<std::size_t>(i + 1)] = true;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!reachable[static_cast<std::size_t>(i)]) {
        report.warnings.push_back({TreeIssue::unreachable_step, i + 1, std::nullopt,
                                   "step " + std::to_string(i + 1) + " is unreachable"});
      }
    }
  }
  return report;
}

TreeOutcome walk_decision_tree(const DecisionTree& tree,
                               const std::function<std::size_t(const Step&)>& choose) {
  // Forward-only gotos guarantee termination.
  for (const auto& step : tree.steps) {
    for (const auto& branch : step.branches) {
      if (branch.action.kind == ActionKind::go_to &&
          (branch.action.target <= step.number || branch.action.target > static_cast<int>(tree.steps.size()))) {
        throw ValidationError("invalid_tree", "tree has a non-forward goto at step " + std::to_string(step.number));
      }
    }
  }

  TreeOutcome outcome;
  std::size_t position = 0;
  while (position < tree.steps.size()) {
    const auto& step = tree.steps[position];
    outcome.visited.push_back(step.number);
    if (step.branches.empty()) break;
    const auto pick = choose(step);
    if (pick >= step.branches.size()) throw ValidationError("invalid_branch", "branch index out of range");
    const auto& action = step.branches[pick].action;
    switch (action.kind) {
      case ActionKind::assign:
        outcome.codes = action.codes;
        return outcome;
      case ActionKind::uncoded:
        outcome.codes = {std::string(kUncoded)};
        return outcome;
      case ActionKind::go_to:
        position = static_cast<std::size_t>(action.target - 1);
        break;
      case ActionKind::continue_to_next:
        ++position;
        break;
    }
  }
  return outcome;
}

std::string render_decision_tree(const DecisionTree& tree) {
  std::ostringstream out;
  for (const auto& step : tree.steps) {
    out << "Step " << step.number << ": " << step.title << "\n";
    for (const auto& branch : step.branches) {
      out << "  - If " << branch.condition << " -> ";
      switch (branch.action.kind) {
        case ActionKind::assign: out << "assign " << join_codes(branch.action.codes); break;
        case ActionKind::uncoded: out << "Uncoded (" << kUncoded << ")"; break;
        case ActionKind::go_to: out << "go to step " << branch.action.target; break;
        case ActionKind::continue_to_next: out << "continue to step " << step.number + 1; break;
      }
      out << "\n";
    }
  }
  return out.str();
}

DecisionTree cdas_decision_tree() {
  DecisionTree tree;
  tree.steps.push_back(
      {1,
       "Verify the Learning Goal Before Coding",
       {{"the utterance is not relevant to the learning goal (greetings, administrative actions, off-topic "
         "conversation)",
         BranchAction::uncoded()},
        {"the utterance is relevant to the learning goal", BranchAction::go_to(2)}}});
  tree.steps.push_back(
      {2,
       "Identify invitations",
       {{"the turn asks for explanation, justification, speculation or prediction",
         BranchAction::assign({"IRE"})},
        {"the turn asks others to build on, evaluate or clarify a prior contribution",
         BranchAction::assign({"ELI"})},
        {"the turn asks others to compare, synthesise or resolve two or more ideas", BranchAction::assign({"IC"})},
        {"the turn makes any other verbal invitation", BranchAction::assign({"OI"})},
        {"the turn contains no invitation", BranchAction::next()}}});
  tree.steps.push_back(
      {3,
       "Identify contributions",
       {{"the turn gives reasons, explanations or evidence", BranchAction::assign({"RE"})},
        {"the turn builds on or adds to an earlier contribution", BranchAction::assign({"EL"})},
        {"the turn compares or integrates ideas with justification", BranchAction::assign({"RC"})},
        {"the turn summarises or compares ideas without reasons", BranchAction::assign({"SC"})},
        {"the turn explicitly agrees", BranchAction::assign({"A"})},
        {"the turn challenges or disagrees", BranchAction::assign({"Q"})},
        {"the turn refers to earlier lessons or shared experiences", BranchAction::assign({"RB"})},
        {"the turn links learning to wider contexts", BranchAction::assign({"RW"})},
        {"no code definition applies", BranchAction::uncoded()}}});
  return tree;
}

}  // namespace dialogcode
