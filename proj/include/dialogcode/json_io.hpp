#pragma once

#include <json.hpp>
#include <string>

#include "dialogcode/codebook.hpp"
#include "dialogcode/coder.hpp"
#include "dialogcode/decision_tree.hpp"
#include "dialogcode/evaluation.hpp"
#include "dialogcode/instruction.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

using Json = nlohmann::json;

// Compact dump with sorted keys; the byte form used for hashing and for every
// file written by the store.
std::string canonical_dump(const Json& j);

// Malformed documents throw ValidationError("invalid_json", ...) naming the
// offending field.
Json codebook_to_json(const Codebook& codebook);
Codebook codebook_from_json(const Json& j);

Json turn_to_json(const Turn& turn);
Turn turn_from_json(const Json& j);

Json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const Json& j);

Json example_to_json(const ExampleItem& item);
ExampleItem example_from_json(const Json& j);

// InstructionConfig schema: role_preamble, global_rules [{priority, text}],
// codebook (object, or the string "builtin:cdas"), decision_tree {steps},
// justification_rules, stability_rules, examples, token_budget.
Json config_to_json(const InstructionConfig& config);
InstructionConfig config_from_json(const Json& j);

// section_map, token_estimate, token_budget, config_hash, warnings.
Json document_sidecar(const InstructionDocument& doc);

Json policy_to_json(const SessionPolicy& policy);
SessionPolicy policy_from_json(const Json& j);

Json coding_to_json(const TurnCoding& coding);
TurnCoding coding_from_json(const Json& j);

Json log_entry_to_json(const LogEntry& entry);
LogEntry log_entry_from_json(const Json& j);

Json feedback_to_json(const FeedbackItem& item);
FeedbackItem feedback_from_json(const Json& j);

Json codes_to_json(const CodeSet& codes);
CodeSet codes_from_json(const Json& j);

Json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const Json& j);

// Deterministic summary of a run: everything except run_id and the event
// log. Two runs over the same inputs with a deterministic backend yield
// identical bytes.
Json run_report_json(const CodingRun& run);

}  // namespace dialogcode
