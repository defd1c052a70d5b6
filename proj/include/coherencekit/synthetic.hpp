#pragma once

// Deterministic synthetic datasets for smoke tests and benchmarks. Text is
// placeholder; only lengths, labels and evidence matter.

#include <cstdint>
#include <cstdio>
#include <string>

#include "corpus.hpp"
#include "hash.hpp"

namespace coherencekit::synthetic {

inline std::string numbered_id(const char* prefix, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%03d", prefix, i);
  return buf;
}

// Dialogs of 1..max_len turns; about 60% entailed, each with a random
// evidence range.
inline Dataset entailment(int count, std::uint64_t seed, int max_len = 5) {
  Dataset ds;
  ds.task = Task::entailment;
  for (int i = 0; i < count; ++i) {
    KeyedRng rng(seed, "synthetic-entailment", i, 0);
    EntailmentExample ex;
    ex.id = numbered_id("ce", i + 1);
    const int n = 1 + rng.next_below(max_len);
    for (int t = 1; t <= n; ++t) {
      ex.units.push_back({std::string(t % 2 == 1 ? "A" : "B"), "turn " + std::to_string(t) + " of dialog " + std::to_string(i + 1)});
    }
    ex.hypothesis = "hypothesis " + std::to_string(i + 1);
    ex.label = rng.next_double() < 0.6 ? EntailmentLabel::entailed : EntailmentLabel::not_entailed;
    if (ex.label == EntailmentLabel::entailed) {
      int s = 1 + rng.next_below(n);
      int e = 1 + rng.next_below(n);
      if (s > e) std::swap(s, e);
      ds.evidence.push_back({ex.id, "", RangeEvidence{s, e}});
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// Pairs (every fifth example a triple) of stories of 1..max_len sentences;
// some choices are one sentence short and get padded. Evidence is a random
// non-empty subset of the positive choice's real sentences.
inline Dataset choice(int count, std::uint64_t seed, int max_len = 5) {
  Dataset ds;
  ds.task = Task::choice;
  for (int i = 0; i < count; ++i) {
    KeyedRng rng(seed, "synthetic-choice", i, 0);
    ChoiceExample ex;
    ex.id = numbered_id("art", i + 1);
    const int m = (i % 5 == 4) ? 3 : 2;
    const int n = 1 + rng.next_below(max_len);
    std::vector<int> lengths;
    for (int c = 0; c < m; ++c) {
      const bool shorter = n > 1 && rng.next_double() < 0.2;
      lengths.push_back(shorter ? n - 1 : n);
    }
    lengths[static_cast<std::size_t>(rng.next_below(m))] = n;  // at least one full-length story
    for (int c = 0; c < m; ++c) {
      std::vector<Unit> story;
      for (int s = 1; s <= lengths[static_cast<std::size_t>(c)]; ++s) {
        story.push_back({std::nullopt, "story " + std::to_string(i + 1) + " choice " + std::to_string(c + 1) +
                                           " sentence " + std::to_string(s)});
      }
      while (static_cast<int>(story.size()) < n) story.push_back({std::nullopt, "", true});
      ex.choices.push_back(std::move(story));
    }
    ex.positive = 1 + rng.next_below(m);
    const int real = lengths[static_cast<std::size_t>(*ex.positive - 1)];
    ChoiceEvidence ev;
    ev.choice = *ex.positive;
    for (int u = 1; u <= real; ++u) {
      if (rng.next_double() < 0.4) ev.units.push_back(u);
    }
    if (ev.units.empty()) ev.units.push_back(1 + rng.next_below(real));
    ev.evidence_case = static_cast<EvidenceCase>(rng.next_below(3));
    ds.evidence.push_back({ex.id, "", ev});
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// Twenty entailed dialogs whose evidence is the whole dialog: ten of one
// turn, ten of three turns.
inline Dataset adversary_fixture() {
  Dataset ds;
  ds.task = Task::entailment;
  for (int i = 0; i < 20; ++i) {
    EntailmentExample ex;
    ex.id = numbered_id("adv", i + 1);
    const int n = i < 10 ? 1 : 3;
    for (int t = 1; t <= n; ++t) {
      ex.units.push_back({std::string(t % 2 == 1 ? "A" : "B"), "turn " + std::to_string(t)});
    }
    ex.hypothesis = "hypothesis " + std::to_string(i + 1);
    ex.label = EntailmentLabel::entailed;
    ds.evidence.push_back({ex.id, "", RangeEvidence{1, n}});
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace coherencekit::synthetic
