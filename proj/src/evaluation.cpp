#include "dialogcode/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "dialogcode/error.hpp"
#include "dialogcode/json_io.hpp"

namespace dialogcode {
namespace {

Ratio ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string percent(const Ratio& r) {
  if (!r) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *r * 100.0);
  return buf;
}

std::string shortest(const Ratio& r) {
  if (!r) return "-";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *r);
  return std::string(buf, end);
}

}  // namespace

std::string_view to_string(MatchMode mode) { return mode == MatchMode::exact ? "exact" : "overlap"; }

std::optional<MatchMode> match_mode_from_string(std::string_view s) {
  if (s == "exact") return MatchMode::exact;
  if (s == "overlap") return MatchMode::overlap;
  return std::nullopt;
}

std::vector<LabelPair> align_labels(const GoldAnnotationSet& gold, const CodingRun& run) {
  if (run.status != RunStatus::complete) {
    throw ValidationError("run_incomplete", "run '" + run.run_id + "' is " + std::string(to_string(run.status)));
  }
  if (gold.lesson_id != run.lesson_id) {
    throw ValidationError("lesson_mismatch",
                          "gold is for lesson '" + gold.lesson_id + "', run coded '" + run.lesson_id + "'");
  }
  std::vector<LabelPair> pairs;
  pairs.reserve(run.codings.size());
  for (const auto& coding : run.codings) {
    auto it = gold.labels.find(coding.turn_id);
    if (it == gold.labels.end()) {
      throw ValidationError("missing_gold", "no gold label for turn " + std::to_string(coding.turn_id));
    }
    pairs.push_back({coding.turn_id, it->second, coding.predicted});
  }
  return pairs;
}

ConfusionMatrix build_confusion(std::span<const LabelPair> pairs, const CodeId& code_id) {
  ConfusionMatrix m{code_id};
  for (const auto& p : pairs) {
    const bool in_gold = p.gold.count(code_id) != 0;
    const bool in_pred = p.predicted.count(code_id) != 0;
    if (in_gold && in_pred) ++m.tp;
    else if (in_pred) ++m.fp;
    else if (in_gold) ++m.fn;
    else ++m.tn;
  }
  return m;
}

ConfusionMatrix build_confusion(const GoldAnnotationSet& gold, const CodingRun& run, const CodeId& code_id) {
  return build_confusion(align_labels(gold, run), code_id);
}

MetricRow metrics(const ConfusionMatrix& m) {
  return {m.code_id, ratio(m.tp, m.tp + m.fp), ratio(m.tp, m.tp + m.fn), ratio(m.tp + m.tn, m.total()),
          ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn)};
}

Ratio f1_from(double precision, double recall) {
  if (precision + recall == 0.0) return std::nullopt;
  return 2.0 * precision * recall / (precision + recall);
}

double turn_precision(std::span<const LabelPair> pairs, MatchMode mode) {
  if (pairs.empty()) return 0.0;
  std::size_t matched = 0;
  for (const auto& p : pairs) {
    if (mode == MatchMode::exact) {
      matched += p.gold == p.predicted;
    } else {
      matched += std::any_of(p.predicted.begin(), p.predicted.end(),
                             [&](const CodeId& c) { return p.gold.count(c) != 0; });
    }
  }
  return static_cast<double>(matched) / static_cast<double>(pairs.size());
}

double turn_precision(const GoldAnnotationSet& gold, const CodingRun& run, MatchMode mode) {
  return turn_precision(align_labels(gold, run), mode);
}

std::vector<ConfusionPair> confusion_pairs(std::span<const LabelPair> pairs) {
  std::map<std::pair<CodeId, CodeId>, std::size_t> counts;
  for (const auto& p : pairs) {
    for (const auto& g : p.gold) {
      if (p.predicted.count(g)) continue;
      for (const auto& q : p.predicted) {
        if (!p.gold.count(q)) ++counts[{g, q}];
      }
    }
  }
  std::vector<ConfusionPair> out;
  for (const auto& [key, n] : counts) out.push_back({key.first, key.second, n});
  // The map already yields lexical order, so a stable sort on count suffices.
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  return out;
}

std::vector<ConfusionPair> confusion_pairs(const GoldAnnotationSet& gold, const CodingRun& run) {
  return confusion_pairs(align_labels(gold, run));
}

MetricsReport evaluate_run(const GoldAnnotationSet& gold, const CodingRun& run, const Codebook& codebook,
                           MatchMode mode) {
  const auto pairs = align_labels(gold, run);
  MetricsReport report;
  report.codebook_version = codebook.version();
  for (const auto& id : codebook.ids()) report.per_code.push_back(metrics(build_confusion(pairs, id)));
  report.turn_precision = turn_precision(pairs, mode);
  report.match_mode = mode;
  report.turn_count = pairs.size();
  return report;
}

std::string render_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %10s %10s %10s %10s\n", "Code", "Precision", "Recall", "Accuracy",
                "F1 Score");
  out << line;
  for (const auto& row : report.per_code) {
    std::snprintf(line, sizeof line, "%-6s %10s %10s %10s %10s\n", row.code_id.c_str(),
                  percent(row.precision).c_str(), percent(row.recall).c_str(), percent(row.accuracy).c_str(),
                  percent(row.f1).c_str());
    out << line;
  }
  out << "\nTurn precision (" << to_string(report.match_mode) << "): " << percent(report.turn_precision) << "% of "
      << report.turn_count << " turns\n";
  return out.str();
}

std::string render_json(const MetricsReport& report) { return metrics_to_json(report).dump(2) + "\n"; }

std::string render_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "code,precision,recall,accuracy,f1\n";
  for (const auto& row : report.per_code) {
    out << row.code_id << ',' << shortest(row.precision) << ',' << shortest(row.recall) << ','
        << shortest(row.accuracy) << ',' << shortest(row.f1) << '\n';
  }
  return out.str();
}

}  // namespace dialogcode
