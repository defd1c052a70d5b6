#pragma once

// Accuracy, strict coherence and lenient coherence over sub-span predictions,
// plus the confidence rule and the threshold sweep used for choice tasks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "backend.hpp"
#include "corpus.hpp"
#include "error.hpp"

namespace coherencekit {

enum class ConfidenceMode {
  literal_max,       // max over other classes of p(c*) - p(c)
  runner_up_margin,  // min over other classes of p(c*) - p(c)
};

inline std::string_view to_string(ConfidenceMode m) {
  return m == ConfidenceMode::literal_max ? "literal_max" : "runner_up_margin";
}

inline ConfidenceMode parse_confidence_mode(std::string_view s) {
  if (s == "literal_max") return ConfidenceMode::literal_max;
  if (s == "runner_up_margin") return ConfidenceMode::runner_up_margin;
  throw Error("unknown confidence mode \"" + std::string(s) + "\"");
}

struct ConfidenceRule {
  double rho = 0.5;
  ConfidenceMode mode = ConfidenceMode::literal_max;
};

inline void validate(const ConfidenceRule& rule) {
  if (!(rule.rho >= 0.0 && rule.rho <= 1.0)) throw Error("rho must lie in [0, 1]");
}

struct Decision {
  int predicted = 1;  // 1-based class index
  bool confident = false;
  bool operator==(const Decision&) const = default;
};

// Argmax with lowest-index tie-break; confident iff the mode's margin >= rho.
inline Decision decide(const Distribution& dist, const ConfidenceRule& rule) {
  const auto& p = dist.probs;
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = c;
  }
  if (p.size() < 2) return {static_cast<int>(best) + 1, true};
  double margin = rule.mode == ConfidenceMode::literal_max ? -1.0 : 2.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (c == best) continue;
    const double gap = p[best] - p[c];
    margin = rule.mode == ConfidenceMode::literal_max ? std::max(margin, gap) : std::min(margin, gap);
  }
  return {static_cast<int>(best) + 1, margin >= rule.rho};
}

inline bool score_span(const SpanGold& gold, const Distribution& dist, const ConfidenceRule& rule) {
  const bool entailment = gold.expect == Expectation::entailed || gold.expect == Expectation::not_entailed;
  if (entailment && dist.probs.size() != 2) {
    throw Error("entailment span " + to_string(gold.span) + " scored against " +
                std::to_string(dist.probs.size()) + " classes");
  }
  if (gold.expect == Expectation::confident_on &&
      (gold.choice < 1 || gold.choice > static_cast<int>(dist.probs.size()))) {
    throw Error("gold choice " + std::to_string(gold.choice) + " outside a " +
                std::to_string(dist.probs.size()) + "-class distribution");
  }
  if (!entailment && dist.probs.size() < 2) throw Error("choice span scored against fewer than 2 classes");
  const Decision d = decide(dist, rule);
  switch (gold.expect) {
    case Expectation::not_entailed: return d.predicted == 1;
    case Expectation::entailed: return d.predicted == 2;
    case Expectation::confident_on: return d.predicted == gold.choice && d.confident;
    case Expectation::non_confident: return !d.confident;
  }
  return false;
}

struct ExampleVerdict {
  std::string example_id;
  bool end_correct = false;
  int span_correct_count = 0;
  int span_total = 0;
  bool coherent = false;

  bool operator==(const ExampleVerdict&) const = default;
};

struct CoherenceResult {
  Task task = Task::entailment;
  double accuracy = 0.0;
  double strict_coherence = 0.0;
  double lenient_macro = 0.0;
  double lenient_micro = 0.0;
  std::optional<double> rho_used;  // choice tasks
  ConfidenceMode mode = ConfidenceMode::literal_max;
  std::vector<ExampleVerdict> verdicts;  // dataset order

  bool operator==(const CoherenceResult&) const = default;
};

inline const Distribution& lookup(const PredictionTable& predictions, const PredictionKey& key) {
  auto it = predictions.find(key);
  if (it == predictions.end()) throw Error("missing prediction for key " + to_string(key));
  return it->second;
}

// Scores every evaluable example. Accuracy uses the full-span argmax only;
// the confidence rule applies to sub-span coherence.
inline CoherenceResult evaluate(const Dataset& ds, const GoldIndex& gold, const PredictionTable& predictions,
                                const ConfidenceRule& rule) {
  validate(rule);
  CoherenceResult result;
  result.task = ds.task;
  result.mode = rule.mode;
  if (ds.task == Task::choice) result.rho_used = rule.rho;

  std::int64_t correct = 0;
  std::int64_t coherent = 0;
  std::int64_t spans_correct = 0;
  std::int64_t spans_total = 0;
  std::vector<double> ratios;
  for (const auto& ex : ds.examples) {
    if (!is_evaluable(ex)) continue;
    const std::string& id = example_id(ex);
    auto g = gold.find(id);
    if (g == gold.end()) throw Error("no gold for example \"" + id + "\"");
    const int n = example_length(ex);
    const SpanRef full{1, n};

    ExampleVerdict v;
    v.example_id = id;
    const Distribution& full_dist = lookup(predictions, {id, full});
    if (const auto* e = std::get_if<EntailmentExample>(&ex)) {
      const int gold_class = e->label == EntailmentLabel::entailed ? 2 : 1;
      v.end_correct = decide(full_dist, rule).predicted == gold_class;
    } else {
      v.end_correct = decide(full_dist, rule).predicted == *std::get<ChoiceExample>(ex).positive;
    }
    for (const auto& span : enumerate_spans(n)) {
      auto sg = g->second.find(span);
      if (sg == g->second.end()) throw Error("no gold for span " + to_string(span) + " of \"" + id + "\"");
      if (score_span(sg->second, lookup(predictions, {id, span}), rule)) ++v.span_correct_count;
      ++v.span_total;
    }
    v.coherent = v.end_correct && v.span_correct_count == v.span_total;

    correct += v.end_correct ? 1 : 0;
    coherent += v.coherent ? 1 : 0;
    spans_correct += v.span_correct_count;
    spans_total += v.span_total;
    ratios.push_back(static_cast<double>(v.span_correct_count) / v.span_total);
    result.verdicts.push_back(std::move(v));
  }
  const auto count = static_cast<double>(result.verdicts.size());
  if (count == 0) throw Error("dataset has no evaluable examples");
  // Summing in sorted order keeps the macro average independent of example order.
  std::sort(ratios.begin(), ratios.end());
  double ratio_sum = 0.0;
  for (double r : ratios) ratio_sum += r;

  result.accuracy = static_cast<double>(correct) / count;
  result.strict_coherence = static_cast<double>(coherent) / count;
  result.lenient_macro = ratio_sum / count;
  result.lenient_micro = static_cast<double>(spans_correct) / static_cast<double>(spans_total);
  return result;
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepResult {
  ConfidenceMode mode = ConfidenceMode::literal_max;
  std::vector<double> grid;
  std::vector<CoherenceResult> results;  // aligned with grid
  double best_strict_rho = 0.0;
  double best_lenient_rho = 0.0;

  const CoherenceResult& at_best_strict() const { return results[index_of(best_strict_rho)]; }
  const CoherenceResult& at_best_lenient() const { return results[index_of(best_lenient_rho)]; }

 private:
  std::size_t index_of(double rho) const {
    return static_cast<std::size_t>(std::find(grid.begin(), grid.end(), rho) - grid.begin());
  }
};

// Snaps a grid value to 12 decimals so that 0.05 * 3 reads back as 0.15.
inline double snap_grid_value(double v) { return std::round(v * 1e12) / 1e12; }

// "start:stop:step", inclusive of stop when step divides the range. Values are
// materialized as start + i*step rather than by accumulation.
inline std::vector<double> parse_grid(std::string_view spec) {
  auto parts = detail::split(spec, ':');
  if (parts.size() == 1) return {detail::parse_double(parts[0], "rho")};
  if (parts.size() != 3) throw Error("grid must be start:stop:step");
  const double start = detail::parse_double(parts[0], "grid start");
  const double stop = detail::parse_double(parts[1], "grid stop");
  const double step = detail::parse_double(parts[2], "grid step");
  if (!(step > 0.0)) throw Error("grid step must be positive");
  if (stop < start) throw Error("grid stop must be >= start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  std::vector<double> grid;
  for (long i = 0; i <= count; ++i) grid.push_back(snap_grid_value(start + static_cast<double>(i) * step));
  return grid;
}

inline std::vector<double> default_grid() { return parse_grid("0.05:0.95:0.05"); }

// Evaluates each grid point against the same predictions. Best thresholds are
// chosen separately for strict and lenient (macro) coherence; ties go to the
// smallest rho.
inline SweepResult sweep_rho(const Dataset& ds, const GoldIndex& gold, const PredictionTable& predictions,
                             const std::vector<double>& grid, ConfidenceMode mode) {
  if (ds.task != Task::choice) throw Error("rho sweep applies to choice tasks only");
  if (grid.empty()) throw Error("rho grid is empty");
  SweepResult sweep;
  sweep.mode = mode;
  sweep.grid = grid;
  std::sort(sweep.grid.begin(), sweep.grid.end());
  sweep.grid.erase(std::unique(sweep.grid.begin(), sweep.grid.end()), sweep.grid.end());
  for (double rho : sweep.grid) sweep.results.push_back(evaluate(ds, gold, predictions, {rho, mode}));

  std::size_t best_strict = 0;
  std::size_t best_lenient = 0;
  for (std::size_t i = 1; i < sweep.results.size(); ++i) {
    if (sweep.results[i].strict_coherence > sweep.results[best_strict].strict_coherence) best_strict = i;
    if (sweep.results[i].lenient_macro > sweep.results[best_lenient].lenient_macro) best_lenient = i;
  }
  sweep.best_strict_rho = sweep.grid[best_strict];
  sweep.best_lenient_rho = sweep.grid[best_lenient];
  return sweep;
}

}  // namespace coherencekit
