#pragma once

// Data model for coherence evaluation: examples made of ordered discourse
// units, consecutive sub-spans over them, evidence annotations, and the
// sub-span gold labels derived from that evidence.

#include <algorithm>
#include <cctype>
#include <compare>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace coherencekit {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class Task { entailment, choice };

inline std::string_view to_string(Task task) {
  return task == Task::entailment ? "entailment" : "choice";
}

inline Task parse_task(std::string_view tag) {
  if (tag == "entailment") return Task::entailment;
  if (tag == "choice") return Task::choice;
  throw Error("unknown task tag \"" + std::string(tag) + "\"");
}

struct Unit {
  std::optional<std::string> speaker;
  std::string text;
  bool padding = false;  // right-padding added to equalize choice lengths

  bool operator==(const Unit&) const = default;
};

// Inclusive, 1-based consecutive sub-span [start, end] of an example's units.
struct SpanRef {
  int start = 1;
  int end = 1;

  auto operator<=>(const SpanRef&) const = default;

  int length() const { return end - start + 1; }
  bool contains(const SpanRef& other) const {
    return start <= other.start && end >= other.end;
  }
};

inline std::string to_string(const SpanRef& span) {
  return "(" + std::to_string(span.start) + "," + std::to_string(span.end) + ")";
}

enum class EntailmentLabel { not_entailed, entailed };

inline std::string_view to_string(EntailmentLabel label) {
  return label == EntailmentLabel::entailed ? "entailed" : "not_entailed";
}

struct EntailmentExample {
  std::string id;
  std::vector<Unit> units;
  std::string hypothesis;
  EntailmentLabel label = EntailmentLabel::not_entailed;

  int length() const { return static_cast<int>(units.size()); }
  bool operator==(const EntailmentExample&) const = default;
};

struct ChoiceExample {
  std::string id;
  // Every choice holds exactly length() units once padded.
  std::vector<std::vector<Unit>> choices;
  // 1-based index of the implausible choice; empty for discarded examples.
  std::optional<int> positive;
  bool excluded = false;

  int length() const {
    return choices.empty() ? 0 : static_cast<int>(choices.front().size());
  }
  int choice_count() const { return static_cast<int>(choices.size()); }
  bool operator==(const ChoiceExample&) const = default;
};

using Example = std::variant<EntailmentExample, ChoiceExample>;

inline const std::string& example_id(const Example& ex) {
  return std::visit([](const auto& e) -> const std::string& { return e.id; }, ex);
}

inline int example_length(const Example& ex) {
  return std::visit([](const auto& e) { return e.length(); }, ex);
}

inline Task example_task(const Example& ex) {
  return std::holds_alternative<EntailmentExample>(ex) ? Task::entailment : Task::choice;
}

// Number of classes a classifier distributes probability over.
inline int class_count(const Example& ex) {
  if (const auto* c = std::get_if<ChoiceExample>(&ex)) return c->choice_count();
  return 2;
}

// Discarded choice examples (no implausible choice) never enter evaluation.
inline bool is_evaluable(const Example& ex) {
  if (const auto* c = std::get_if<ChoiceExample>(&ex)) {
    return c->positive.has_value() && !c->excluded;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Evidence

enum class EvidenceCase { conflict_with_context, malformed, context_conflict_unresolved };

inline std::string_view to_string(EvidenceCase c) {
  switch (c) {
    case EvidenceCase::conflict_with_context: return "conflict-with-context";
    case EvidenceCase::malformed: return "malformed";
    case EvidenceCase::context_conflict_unresolved: return "context-conflict-unresolved";
  }
  return "";
}

inline EvidenceCase parse_evidence_case(std::string_view tag) {
  if (tag == "conflict-with-context") return EvidenceCase::conflict_with_context;
  if (tag == "malformed") return EvidenceCase::malformed;
  if (tag == "context-conflict-unresolved") return EvidenceCase::context_conflict_unresolved;
  throw Error("unknown evidence case \"" + std::string(tag) + "\"");
}

// Required-unit set implied by each implausibility case for three-sentence
// stories whose middle sentence differs between choices. `conflicting` is the
// context sentence the middle one clashes with (1 or 3).
inline std::vector<int> required_units_for_case(EvidenceCase c, int conflicting = 3) {
  switch (c) {
    case EvidenceCase::conflict_with_context:
      if (conflicting == 1) return {1, 2};
      return {2, conflicting};
    case EvidenceCase::malformed: return {2};
    case EvidenceCase::context_conflict_unresolved: return {1, 3};
  }
  return {};
}

struct RangeEvidence {
  int start = 1;
  int end = 1;
  bool operator==(const RangeEvidence&) const = default;
};

struct ChoiceEvidence {
  int choice = 1;
  std::vector<int> units;  // sorted, distinct
  EvidenceCase evidence_case = EvidenceCase::conflict_with_context;
  bool operator==(const ChoiceEvidence&) const = default;
};

struct BothPlausible {
  bool operator==(const BothPlausible&) const = default;
};

using EvidencePayload = std::variant<RangeEvidence, ChoiceEvidence, BothPlausible>;

struct EvidenceRecord {
  std::string example_id;
  std::string annotator_id;
  EvidencePayload payload;
  bool operator==(const EvidenceRecord&) const = default;
};

inline ordered_json payload_to_json(const EvidencePayload& payload) {
  ordered_json out = ordered_json::object();
  if (const auto* r = std::get_if<RangeEvidence>(&payload)) {
    out["start"] = r->start;
    out["end"] = r->end;
  } else if (const auto* c = std::get_if<ChoiceEvidence>(&payload)) {
    out["choice"] = c->choice;
    out["units"] = c->units;
    out["case"] = std::string(to_string(c->evidence_case));
  } else {
    out["both_plausible"] = true;
  }
  return out;
}

namespace detail {

inline const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(std::string("missing field \"") + key + "\"");
  return *it;
}

inline int int_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number_integer()) throw Error(std::string("field \"") + key + "\" must be an integer");
  return v.get<int>();
}

inline std::string string_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) throw Error(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); });
}

}  // namespace detail

// Parses the payload shape only; bounds depend on the owning example.
inline EvidencePayload payload_from_json(const json& j) {
  if (!j.is_object()) throw Error("evidence payload must be a JSON object");
  if (j.contains("both_plausible")) {
    if (j.at("both_plausible") != true) throw Error("\"both_plausible\" must be true when present");
    return BothPlausible{};
  }
  if (j.contains("choice")) {
    ChoiceEvidence ev;
    ev.choice = detail::int_field(j, "choice");
    const json& units = detail::field(j, "units");
    if (!units.is_array()) throw Error("field \"units\" must be an array");
    std::set<int> sorted;
    for (const auto& u : units) {
      if (!u.is_number_integer()) throw Error("evidence units must be integers");
      sorted.insert(u.get<int>());
    }
    ev.units.assign(sorted.begin(), sorted.end());
    ev.evidence_case = parse_evidence_case(detail::string_field(j, "case"));
    return ev;
  }
  if (j.contains("start")) {
    return RangeEvidence{detail::int_field(j, "start"), detail::int_field(j, "end")};
  }
  throw Error("unrecognized evidence payload " + j.dump());
}

// Checks a payload against the example it annotates. Returns an error message
// or an empty string.
inline std::string check_payload(const Example& ex, const EvidencePayload& payload) {
  const int n = example_length(ex);
  if (const auto* r = std::get_if<RangeEvidence>(&payload)) {
    if (!std::holds_alternative<EntailmentExample>(ex)) return "range evidence on a choice example";
    if (r->start < 1 || r->end < r->start || r->end > n) {
      return "evidence range " + to_string(SpanRef{r->start, r->end}) + " out of range [1," +
             std::to_string(n) + "]";
    }
    return {};
  }
  if (const auto* c = std::get_if<ChoiceEvidence>(&payload)) {
    const auto* choice = std::get_if<ChoiceExample>(&ex);
    if (choice == nullptr) return "choice evidence on an entailment example";
    if (c->choice < 1 || c->choice > choice->choice_count()) {
      return "evidence names choice " + std::to_string(c->choice) + " but the example has " +
             std::to_string(choice->choice_count()) + " choices";
    }
    if (c->units.empty()) return "evidence unit set is empty";
    for (int u : c->units) {
      if (u < 1 || u > n) {
        return "evidence unit index " + std::to_string(u) + " out of range [1," +
               std::to_string(n) + "]";
      }
    }
    return {};
  }
  if (!std::holds_alternative<ChoiceExample>(ex)) return "both_plausible on an entailment example";
  return {};
}

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
  Task task = Task::entailment;
  std::vector<Example> examples;
  std::vector<EvidenceRecord> evidence;

  const Example* find(std::string_view id) const {
    for (const auto& ex : examples) {
      if (example_id(ex) == id) return &ex;
    }
    return nullptr;
  }

  const EvidenceRecord* evidence_for(std::string_view id) const {
    for (const auto& rec : evidence) {
      if (rec.example_id == id) return &rec;
    }
    return nullptr;
  }

  bool operator==(const Dataset&) const = default;
};

namespace detail {

inline Unit parse_unit(const json& j) {
  if (!j.is_object()) throw Error("unit must be a JSON object");
  Unit unit;
  unit.text = string_field(j, "text");
  if (blank(unit.text)) throw Error("unit text is empty");
  if (auto it = j.find("speaker"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("unit speaker must be a string or null");
    unit.speaker = it->get<std::string>();
  }
  return unit;
}

inline std::vector<Unit> parse_units(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw Error("units must be a non-empty array");
  std::vector<Unit> units;
  for (const auto& u : arr) units.push_back(parse_unit(u));
  return units;
}

inline ordered_json unit_to_json(const Unit& u, bool always_speaker) {
  ordered_json j = ordered_json::object();
  if (u.speaker) {
    j["speaker"] = *u.speaker;
  } else if (always_speaker) {
    j["speaker"] = nullptr;
  }
  j["text"] = u.text;
  return j;
}

}  // namespace detail

// Parses one dataset line. `evidence` receives the attached record, if any.
inline Example parse_example(const json& j, std::optional<EvidenceRecord>& evidence) {
  if (!j.is_object()) throw Error("line is not a JSON object");
  const std::string id = detail::string_field(j, "id");
  if (id.empty()) throw Error("example id is empty");
  const Task task = parse_task(detail::string_field(j, "task"));
  const json* ev = nullptr;
  if (auto it = j.find("evidence"); it != j.end() && !it->is_null()) ev = &*it;
  evidence.reset();

  if (task == Task::entailment) {
    EntailmentExample ex;
    ex.id = id;
    ex.units = detail::parse_units(detail::field(j, "units"));
    ex.hypothesis = detail::string_field(j, "hypothesis");
    const std::string label = detail::string_field(j, "label");
    if (label == "entailed") {
      ex.label = EntailmentLabel::entailed;
    } else if (label == "not_entailed") {
      ex.label = EntailmentLabel::not_entailed;
    } else {
      throw Error("unknown label \"" + label + "\"");
    }
    if (ev != nullptr) {
      if (ex.label != EntailmentLabel::entailed) throw Error("evidence on a not_entailed example");
      RangeEvidence range{detail::int_field(*ev, "start"), detail::int_field(*ev, "end")};
      Example wrapped = ex;
      if (auto msg = check_payload(wrapped, range); !msg.empty()) throw Error(msg);
      evidence = EvidenceRecord{id, "", range};
    }
    return ex;
  }

  ChoiceExample ex;
  ex.id = id;
  const json& choices = detail::field(j, "choices");
  if (!choices.is_array() || choices.size() < 2) throw Error("choices must list at least 2 texts");
  std::size_t longest = 0;
  for (const auto& c : choices) {
    if (!c.is_array() || c.empty()) throw Error("each choice must be a non-empty array of units");
    std::vector<Unit> units;
    for (const auto& u : c) units.push_back(detail::parse_unit(u));
    longest = std::max(longest, units.size());
    ex.choices.push_back(std::move(units));
  }
  for (auto& c : ex.choices) {
    while (c.size() < longest) c.push_back(Unit{std::nullopt, "", true});
  }
  if (auto it = j.find("positive"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw Error("field \"positive\" must be an integer or null");
    const int positive = it->get<int>();
    if (positive < 1 || positive > ex.choice_count()) {
      throw Error("positive choice " + std::to_string(positive) + " out of range [1," +
                  std::to_string(ex.choice_count()) + "]");
    }
    ex.positive = positive;
  }
  if (auto it = j.find("excluded"); it != j.end()) {
    if (!it->is_boolean()) throw Error("field \"excluded\" must be a boolean");
    ex.excluded = it->get<bool>();
  }
  if (ev != nullptr) {
    if (!ex.positive) throw Error("evidence on a choice example without a positive choice");
    EvidencePayload payload = payload_from_json(*ev);
    if (!std::holds_alternative<ChoiceEvidence>(payload)) {
      throw Error("choice evidence must carry \"choice\", \"units\" and \"case\"");
    }
    Example wrapped = ex;
    if (auto msg = check_payload(wrapped, payload); !msg.empty()) throw Error(msg);
    if (std::get<ChoiceEvidence>(payload).choice != *ex.positive) {
      throw Error("evidence names choice " + std::to_string(std::get<ChoiceEvidence>(payload).choice) +
                  " but the positive choice is " + std::to_string(*ex.positive));
    }
    evidence = EvidenceRecord{id, "", std::move(payload)};
  }
  return ex;
}

// Reads line-delimited JSON. When `task` is given, every line must carry it;
// otherwise the first line decides. Blank lines are skipped.
inline Dataset parse_dataset(std::istream& in, std::string_view source,
                             std::optional<Task> task = std::nullopt) {
  Dataset ds;
  std::unordered_map<std::string, int> first_line;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    return Error(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    std::optional<EvidenceRecord> evidence;
    Example ex;
    try {
      ex = parse_example(j, evidence);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    if (!task) task = example_task(ex);
    if (example_task(ex) != *task) {
      throw fail("task \"" + std::string(to_string(example_task(ex))) + "\" in a " +
                 std::string(to_string(*task)) + " dataset");
    }
    const std::string& id = example_id(ex);
    if (auto [it, inserted] = first_line.emplace(id, line_no); !inserted) {
      throw fail("duplicate example id \"" + id + "\" on lines " + std::to_string(it->second) +
                 " and " + std::to_string(line_no));
    }
    ds.examples.push_back(std::move(ex));
    if (evidence) ds.evidence.push_back(std::move(*evidence));
  }
  ds.task = task.value_or(Task::entailment);
  return ds;
}

inline Dataset load_dataset(const std::string& path, std::optional<Task> task = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path);
  return parse_dataset(in, path, task);
}

inline ordered_json example_to_json(const Example& ex, const EvidenceRecord* evidence) {
  ordered_json j = ordered_json::object();
  if (const auto* e = std::get_if<EntailmentExample>(&ex)) {
    j["id"] = e->id;
    j["task"] = "entailment";
    j["units"] = ordered_json::array();
    for (const auto& u : e->units) j["units"].push_back(detail::unit_to_json(u, true));
    j["hypothesis"] = e->hypothesis;
    j["label"] = std::string(to_string(e->label));
  } else {
    const auto& c = std::get<ChoiceExample>(ex);
    j["id"] = c.id;
    j["task"] = "choice";
    j["choices"] = ordered_json::array();
    for (const auto& choice : c.choices) {
      ordered_json units = ordered_json::array();
      for (const auto& u : choice) {
        if (!u.padding) units.push_back(detail::unit_to_json(u, false));
      }
      j["choices"].push_back(std::move(units));
    }
    j["positive"] = c.positive ? ordered_json(*c.positive) : ordered_json(nullptr);
    if (c.excluded) j["excluded"] = true;
  }
  j["evidence"] = evidence != nullptr ? payload_to_json(evidence->payload) : ordered_json(nullptr);
  return j;
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& ex : ds.examples) {
    out << example_to_json(ex, ds.evidence_for(example_id(ex))).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Spans and gold derivation

// All n(n+1)/2 consecutive sub-spans of an n-unit text, ordered by (start, end).
inline std::vector<SpanRef> enumerate_spans(int n) {
  if (n < 1) throw Error("span enumeration needs n >= 1, got " + std::to_string(n));
  std::vector<SpanRef> spans;
  spans.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int a = 1; a <= n; ++a) {
    for (int b = a; b <= n; ++b) spans.push_back({a, b});
  }
  return spans;
}

enum class Expectation { not_entailed, entailed, confident_on, non_confident };

struct SpanGold {
  SpanRef span;
  Expectation expect = Expectation::not_entailed;
  int choice = 0;  // set for confident_on

  bool operator==(const SpanGold&) const = default;
};

using GoldMap = std::map<SpanRef, SpanGold>;

// A span entails the hypothesis iff it contains the whole evidence range.
inline GoldMap derive_gold_entailment(const EntailmentExample& ex,
                                      std::optional<RangeEvidence> evidence) {
  const bool positive = ex.label == EntailmentLabel::entailed;
  if (positive && !evidence) throw Error("entailed example \"" + ex.id + "\" has no evidence");
  if (!positive && evidence) throw Error("not_entailed example \"" + ex.id + "\" carries evidence");
  if (evidence) {
    if (auto msg = check_payload(Example(ex), *evidence); !msg.empty()) {
      throw Error("example \"" + ex.id + "\": " + msg);
    }
  }
  GoldMap gold;
  for (const auto& span : enumerate_spans(ex.length())) {
    bool entailed = positive && span.contains({evidence->start, evidence->end});
    gold.emplace(span, SpanGold{span, entailed ? Expectation::entailed : Expectation::not_entailed});
  }
  return gold;
}

// A span is decidable iff it contains the hull of the required units; there
// the classifier must be confident on the positive choice, elsewhere it must
// not be confident at all.
inline GoldMap derive_gold_choice(const ChoiceExample& ex, const ChoiceEvidence& evidence) {
  if (!ex.positive) throw Error("choice example \"" + ex.id + "\" has no positive choice");
  if (evidence.choice != *ex.positive) {
    throw Error("evidence for \"" + ex.id + "\" names choice " + std::to_string(evidence.choice) +
                " but the positive choice is " + std::to_string(*ex.positive));
  }
  if (evidence.units.empty()) throw Error("evidence for \"" + ex.id + "\" has no required units");
  if (auto msg = check_payload(Example(ex), evidence); !msg.empty()) {
    throw Error("example \"" + ex.id + "\": " + msg);
  }
  const auto [lo, hi] = std::minmax_element(evidence.units.begin(), evidence.units.end());
  const SpanRef hull{*lo, *hi};
  GoldMap gold;
  for (const auto& span : enumerate_spans(ex.length())) {
    if (span.contains(hull)) {
      gold.emplace(span, SpanGold{span, Expectation::confident_on, *ex.positive});
    } else {
      gold.emplace(span, SpanGold{span, Expectation::non_confident});
    }
  }
  return gold;
}

inline GoldMap derive_gold(const Example& ex, const EvidenceRecord* evidence) {
  if (const auto* e = std::get_if<EntailmentExample>(&ex)) {
    std::optional<RangeEvidence> range;
    if (evidence != nullptr) {
      const auto* r = std::get_if<RangeEvidence>(&evidence->payload);
      if (r == nullptr) throw Error("example \"" + e->id + "\" has non-range evidence");
      range = *r;
    }
    return derive_gold_entailment(*e, range);
  }
  const auto& c = std::get<ChoiceExample>(ex);
  if (evidence == nullptr) throw Error("choice example \"" + c.id + "\" has no evidence");
  const auto* ev = std::get_if<ChoiceEvidence>(&evidence->payload);
  if (ev == nullptr) throw Error("choice example \"" + c.id + "\" has no usable evidence");
  return derive_gold_choice(c, *ev);
}

// Gold maps keyed by example id, for every evaluable example.
using GoldIndex = std::unordered_map<std::string, GoldMap>;

inline GoldIndex derive_gold_index(const Dataset& ds) {
  GoldIndex index;
  for (const auto& ex : ds.examples) {
    if (!is_evaluable(ex)) continue;
    index.emplace(example_id(ex), derive_gold(ex, ds.evidence_for(example_id(ex))));
  }
  return index;
}

// ---------------------------------------------------------------------------
// Span realization

// The text a classifier sees for one sub-span.
struct TaskInstance {
  Task task = Task::entailment;
  std::vector<std::string> premise;  // entailment
  std::string hypothesis;            // entailment
  std::vector<std::vector<std::string>> choices;  // choice

  int class_count() const {
    return task == Task::entailment ? 2 : static_cast<int>(choices.size());
  }
  bool operator==(const TaskInstance&) const = default;
};

inline std::string render_unit(const Unit& u) {
  if (u.padding) return "";
  if (u.speaker) return *u.speaker + ": " + u.text;
  return u.text;
}

inline TaskInstance realize_span(const Example& ex, const SpanRef& span) {
  const int n = example_length(ex);
  if (span.start < 1 || span.end < span.start || span.end > n) {
    throw Error("span " + to_string(span) + " out of range for \"" + example_id(ex) +
                "\" with " + std::to_string(n) + " units");
  }
  TaskInstance inst;
  inst.task = example_task(ex);
  if (const auto* e = std::get_if<EntailmentExample>(&ex)) {
    for (int i = span.start; i <= span.end; ++i) inst.premise.push_back(render_unit(e->units[i - 1]));
    inst.hypothesis = e->hypothesis;
  } else {
    for (const auto& choice : std::get<ChoiceExample>(ex).choices) {
      std::vector<std::string> slice;
      for (int i = span.start; i <= span.end; ++i) slice.push_back(render_unit(choice[i - 1]));
      inst.choices.push_back(std::move(slice));
    }
  }
  return inst;
}

}  // namespace coherencekit
