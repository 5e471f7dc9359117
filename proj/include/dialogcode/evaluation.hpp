#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/codebook.hpp"
#include "dialogcode/coder.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

struct ConfusionMatrix {
  CodeId code_id;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// nullopt marks an undefined metric (zero denominator).
using Ratio = std::optional<double>;

struct MetricRow {
  CodeId code_id;
  Ratio precision;
  Ratio recall;
  Ratio accuracy;
  Ratio f1;

  bool operator==(const MetricRow&) const = default;
};

enum class MatchMode { exact, overlap };

std::string_view to_string(MatchMode mode);
std::optional<MatchMode> match_mode_from_string(std::string_view s);

struct MetricsReport {
  std::string codebook_version;
  std::vector<MetricRow> per_code;  // codebook order
  double turn_precision = 0.0;
  MatchMode match_mode = MatchMode::exact;
  std::size_t turn_count = 0;

  bool operator==(const MetricsReport&) const = default;
};

// Predicted and gold sets per turn, in lesson order. The building block every
// metric below is computed from.
struct LabelPair {
  TurnId turn_id = 0;
  CodeSet gold;
  CodeSet predicted;
};

// Checks that `run` is complete and that `gold` labels every coded turn.
// Errors: ValidationError kinds run_incomplete, lesson_mismatch, missing_gold.
std::vector<LabelPair> align_labels(const GoldAnnotationSet& gold, const CodingRun& run);

ConfusionMatrix build_confusion(std::span<const LabelPair> pairs, const CodeId& code_id);
ConfusionMatrix build_confusion(const GoldAnnotationSet& gold, const CodingRun& run, const CodeId& code_id);

MetricRow metrics(const ConfusionMatrix& m);

// 2pr / (p + r); undefined when p + r is zero.
Ratio f1_from(double precision, double recall);

double turn_precision(std::span<const LabelPair> pairs, MatchMode mode);
double turn_precision(const GoldAnnotationSet& gold, const CodingRun& run, MatchMode mode);

struct ConfusionPair {
  CodeId gold_code;
  CodeId predicted_code;
  std::size_t count = 0;

  bool operator==(const ConfusionPair&) const = default;
};

// Counts (g, p) for g in gold minus predicted and p in predicted minus gold.
// Sorted by count descending, then gold code, then predicted code.
std::vector<ConfusionPair> confusion_pairs(std::span<const LabelPair> pairs);
std::vector<ConfusionPair> confusion_pairs(const GoldAnnotationSet& gold, const CodingRun& run);

MetricsReport evaluate_run(const GoldAnnotationSet& gold, const CodingRun& run, const Codebook& codebook,
                           MatchMode mode = MatchMode::exact);

// Precision / Recall / Accuracy / F1 Score columns in percent with one
// decimal; undefined cells print "-".
std::string render_table(const MetricsReport& report);
// per_code rows, turn_precision, match_mode, turn_count; undefined is null.
std::string render_json(const MetricsReport& report);
// Header `code,precision,recall,accuracy,f1`; ratios, undefined is "-".
std::string render_csv(const MetricsReport& report);

}  // namespace dialogcode
