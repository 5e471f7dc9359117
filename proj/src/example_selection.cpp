#include "dialogcode/example_selection.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <random>

#include "dialogcode/error.hpp"

namespace dialogcode {
namespace {

struct Position {
  std::size_t lesson = 0;
  std::size_t turn = 0;

  auto operator<=>(const Position&) const = default;
};

// Unbiased draw in [0, n) from raw engine output. Distribution objects are
// avoided because their algorithms differ between standard libraries.
std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

// Gold labels aligned with lesson turns; nullptr where a turn is unlabeled.
using Labels = std::vector<std::vector<const CodeSet*>>;

Labels align_gold(std::span<const Lesson> corpus, std::span<const GoldAnnotationSet> gold) {
  std::map<std::string, const GoldAnnotationSet*> by_id;
  for (const auto& g : gold) by_id[g.lesson_id] = &g;
  Labels labels;
  for (const auto& lesson : corpus) {
    auto it = by_id.find(lesson.lesson_id);
    if (it == by_id.end()) {
      throw ValidationError("missing_gold", "no gold annotations for lesson '" + lesson.lesson_id + "'");
    }
    auto& row = labels.emplace_back();
    for (const auto& turn : lesson.turns) {
      auto label = it->second->labels.find(turn.turn_id);
      row.push_back(label == it->second->labels.end() ? nullptr : &label->second);
    }
  }
  return labels;
}

ExampleSet per_code(std::span<const Lesson> corpus, const Labels& labels, const Codebook& codebook,
                    std::size_t k, std::mt19937_64& rng) {
  ExampleSet set;
  for (const auto& code : codebook.substantive_ids()) {
    std::vector<Position> pool;
    for (std::size_t l = 0; l < corpus.size(); ++l) {
      for (std::size_t t = 0; t < labels[l].size(); ++t) {
        if (labels[l][t] && labels[l][t]->count(code)) pool.push_back({l, t});
      }
    }
    if (pool.size() < k) {
      throw ValidationError("insufficient_examples", "code " + code + " has " + std::to_string(pool.size()) +
                                                         " gold instances, " + std::to_string(k) + " requested");
    }
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + draw(rng, pool.size() - i)]);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    for (const auto& p : pool) {
      ExampleItem item;
      item.kind = ExampleKind::core;
      item.focus_turn = corpus[p.lesson].turns[p.turn];
      item.gold_codes = *labels[p.lesson][p.turn];
      set.items.push_back(std::move(item));
    }
  }
  return set;
}

ExampleSet contextual(std::span<const Lesson> corpus, const Labels& labels, const ContextualFlow& flow,
                      std::mt19937_64& rng) {
  std::size_t labeled = 0;
  for (const auto& row : labels) labeled += std::count_if(row.begin(), row.end(), [](auto* p) { return p; });
  if (flow.total_n > labeled) {
    throw ValidationError("corpus_too_small", "total_n " + std::to_string(flow.total_n) + " exceeds the " +
                                                  std::to_string(labeled) + " labelled corpus turns");
  }

  std::vector<std::size_t> lengths(flow.total_n / flow.window, flow.window);
  if (flow.total_n % flow.window) lengths.push_back(flow.total_n % flow.window);

  // One random tie-break key per possible window start, drawn up front.
  std::vector<std::vector<std::uint64_t>> keys;
  std::vector<std::vector<bool>> used;
  for (const auto& row : labels) {
    auto& k = keys.emplace_back(row.size());
    for (auto& key : k) key = rng();
    used.emplace_back(row.size(), false);
  }

  CodeSet covered;
  std::vector<std::pair<Position, std::size_t>> chosen;
  for (std::size_t length : lengths) {
    std::optional<Position> best;
    std::size_t best_gain = 0;
    std::uint64_t best_key = 0;
    for (std::size_t l = 0; l < labels.size(); ++l) {
      for (std::size_t s = 0; s + length <= labels[l].size(); ++s) {
        CodeSet fresh;
        bool ok = true;
        for (std::size_t t = s; t < s + length && ok; ++t) {
          ok = labels[l][t] && !used[l][t];
          if (!ok) break;
          for (const auto& c : *labels[l][t]) {
            if (!covered.count(c)) fresh.insert(c);
          }
        }
        if (!ok) continue;
        const auto key = keys[l][s];
        if (!best || fresh.size() > best_gain || (fresh.size() == best_gain && key > best_key)) {
          best = Position{l, s};
          best_gain = fresh.size();
          best_key = key;
        }
      }
    }
    if (!best) {
      throw ValidationError("corpus_too_small", "cannot place " + std::to_string(lengths.size()) +
                                                    " disjoint windows of " + std::to_string(flow.window) +
                                                    " labelled turns in the corpus");
    }
    for (std::size_t t = best->turn; t < best->turn + length; ++t) {
      used[best->lesson][t] = true;
      covered.insert(labels[best->lesson][t]->begin(), labels[best->lesson][t]->end());
    }
    chosen.push_back({*best, length});
  }

  std::sort(chosen.begin(), chosen.end());
  ExampleSet set;
  for (const auto& [start, length] : chosen) {
    const auto& turns = corpus[start.lesson].turns;
    for (std::size_t t = start.turn; t < start.turn + length; ++t) {
      ExampleItem item;
      item.kind = ExampleKind::core;
      item.context_turns.assign(turns.begin() + static_cast<std::ptrdiff_t>(start.turn),
                                turns.begin() + static_cast<std::ptrdiff_t>(t));
      item.focus_turn = turns[t];
      item.gold_codes = *labels[start.lesson][t];
      set.items.push_back(std::move(item));
    }
  }
  return set;
}

}  // namespace

std::size_t requested_examples(const ExampleSelectionSpec& spec, std::size_t substantive_codes) {
  if (const auto* p = std::get_if<PerCodeIsolated>(&spec.mode)) return p->k * substantive_codes;
  return std::get<ContextualFlow>(spec.mode).total_n;
}

ExampleSet select_examples(std::span<const Lesson> corpus, std::span<const GoldAnnotationSet> gold,
                           const Codebook& codebook, const ExampleSelectionSpec& spec) {
  const auto labels = align_gold(corpus, gold);
  std::mt19937_64 rng(spec.seed);
  if (const auto* p = std::get_if<PerCodeIsolated>(&spec.mode)) {
    if (p->k == 0) throw ValidationError("invalid_selection", "k must be at least 1");
    return per_code(corpus, labels, codebook, p->k, rng);
  }
  const auto& flow = std::get<ContextualFlow>(spec.mode);
  if (flow.total_n == 0 || flow.window == 0) {
    throw ValidationError("invalid_selection", "total_n and window must be at least 1");
  }
  return contextual(corpus, labels, flow, rng);
}

}  // namespace dialogcode
