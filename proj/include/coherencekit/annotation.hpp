#pragma once

// Two-annotator evidence annotation with third-party adjudication. All state
// is a fold over an append-only event log, persisted as JSON lines.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "report.hpp"
#include "stats.hpp"

namespace coherencekit {

// A request that is well-formed but illegal in the task's current state.
class ConflictError : public Error {
 public:
  using Error::Error;
};

enum class TaskStatus { unassigned, single_annotated, double_annotated, disagreed, adjudicated, discarded };

inline std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::unassigned: return "unassigned";
    case TaskStatus::single_annotated: return "single-annotated";
    case TaskStatus::double_annotated: return "double-annotated";
    case TaskStatus::disagreed: return "disagreed";
    case TaskStatus::adjudicated: return "adjudicated";
    case TaskStatus::discarded: return "discarded";
  }
  return "";
}

struct AnnotationConfig {
  std::vector<std::string> annotators;
  std::vector<std::string> adjudicators;
  bool timestamps = true;
};

enum class EventKind { submission, adjudication };

struct LogEvent {
  std::int64_t seq = 0;
  EventKind kind = EventKind::submission;
  std::string actor;
  std::string example_id;
  EvidencePayload payload;
  std::optional<std::string> timestamp;
};

inline ordered_json event_to_json(const LogEvent& e) {
  ordered_json j = ordered_json::object();
  j["seq"] = e.seq;
  j["type"] = e.kind == EventKind::submission ? "submission" : "adjudication";
  j["actor"] = e.actor;
  j["example_id"] = e.example_id;
  j["payload"] = payload_to_json(e.payload);
  if (e.timestamp) j["ts"] = *e.timestamp;
  return j;
}

inline LogEvent event_from_json(const json& j) {
  LogEvent e;
  e.seq = j.at("seq").get<std::int64_t>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "submission") {
    e.kind = EventKind::submission;
  } else if (type == "adjudication") {
    e.kind = EventKind::adjudication;
  } else {
    throw Error("unknown log event type \"" + type + "\"");
  }
  e.actor = j.at("actor").get<std::string>();
  e.example_id = j.at("example_id").get<std::string>();
  e.payload = payload_from_json(j.at("payload"));
  if (j.contains("ts")) e.timestamp = j.at("ts").get<std::string>();
  return e;
}

struct Pass {
  std::string annotator;
  EvidencePayload payload;
  bool operator==(const Pass&) const = default;
};

struct TaskState {
  std::string example_id;
  TaskStatus status = TaskStatus::unassigned;
  std::vector<Pass> passes;  // at most two, in arrival order
  std::optional<EvidenceRecord> final_record;

  bool operator==(const TaskState&) const = default;
};

// What an annotator (or adjudicator) is shown. Gold fields never appear;
// `payloads` is filled only for adjudication views.
struct TaskView {
  std::string example_id;
  Task task = Task::entailment;
  TaskStatus status = TaskStatus::unassigned;
  ordered_json example;
  std::vector<Pass> payloads;
};

inline ordered_json render_for_annotation(const Example& ex) {
  ordered_json j = ordered_json::object();
  if (const auto* e = std::get_if<EntailmentExample>(&ex)) {
    ordered_json units = ordered_json::array();
    for (std::size_t i = 0; i < e->units.size(); ++i) {
      units.push_back({{"index", i + 1}, {"text", render_unit(e->units[i])}});
    }
    j["units"] = units;
    j["hypothesis"] = e->hypothesis;
  } else {
    ordered_json choices = ordered_json::array();
    for (const auto& choice : std::get<ChoiceExample>(ex).choices) {
      ordered_json units = ordered_json::array();
      for (std::size_t i = 0; i < choice.size(); ++i) {
        units.push_back({{"index", i + 1}, {"text", render_unit(choice[i])}});
      }
      choices.push_back(units);
    }
    j["choices"] = choices;
  }
  return j;
}

inline ordered_json view_to_json(const TaskView& v) {
  ordered_json j = ordered_json::object();
  j["example_id"] = v.example_id;
  j["task"] = std::string(to_string(v.task));
  j["status"] = std::string(to_string(v.status));
  j["example"] = v.example;
  if (!v.payloads.empty()) {
    ordered_json payloads = ordered_json::array();
    for (const auto& p : v.payloads) {
      payloads.push_back({{"annotator", p.annotator}, {"payload", payload_to_json(p.payload)}});
    }
    j["payloads"] = payloads;
  }
  return j;
}

class AnnotationStore {
 public:
  // Tasks cover entailed entailment examples and choice examples with a
  // positive choice. An existing log at `log_path` is replayed first.
  AnnotationStore(Dataset dataset, AnnotationConfig config, std::optional<std::filesystem::path> log_path = {})
      : dataset_(std::move(dataset)), config_(std::move(config)), log_path_(std::move(log_path)) {
    for (const auto& a : config_.annotators) annotators_.insert(a);
    for (const auto& a : config_.adjudicators) adjudicators_.insert(a);
    if (annotators_.size() < 2) throw Error("annotation needs at least two annotators");
    if (log_path_ && std::filesystem::exists(*log_path_)) {
      std::ifstream in(*log_path_);
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank(line)) continue;
        LogEvent e;
        try {
          e = event_from_json(json::parse(line));
        } catch (const std::exception& ex) {
          throw Error(log_path_->string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
        events_.push_back(std::move(e));
      }
    }
    states_ = fold(dataset_, config_, events_);
  }

  // Pure replay of `events` over a fresh task table.
  static std::map<std::string, TaskState> fold(const Dataset& ds, const AnnotationConfig& cfg,
                                               const std::vector<LogEvent>& events) {
    std::map<std::string, TaskState> states = initial_states(ds);
    std::set<std::string> annotators(cfg.annotators.begin(), cfg.annotators.end());
    std::set<std::string> adjudicators(cfg.adjudicators.begin(), cfg.adjudicators.end());
    for (const auto& e : events) apply(ds, annotators, adjudicators, states, e);
    return states;
  }

  std::optional<TaskView> next_task(const std::string& annotator) const {
    std::shared_lock lock(mutex_);
    const bool annotates = annotators_.count(annotator) != 0;
    const bool adjudicates = adjudicators_.count(annotator) != 0;
    if (!annotates && !adjudicates) throw Error("unknown annotator \"" + annotator + "\"");
    if (adjudicates) {
      for (const auto& [id, st] : states_) {
        if (st.status != TaskStatus::disagreed) continue;
        if (authored(st, annotator)) continue;
        return make_view(st, true);
      }
    }
    if (annotates) {
      for (const auto& [id, st] : states_) {
        if (st.status != TaskStatus::unassigned && st.status != TaskStatus::single_annotated) continue;
        if (authored(st, annotator)) continue;
        return make_view(st, false);
      }
    }
    return std::nullopt;
  }

  TaskStatus submit(const std::string& annotator, const std::string& example_id, const EvidencePayload& payload) {
    return commit(EventKind::submission, annotator, example_id, payload).status;
  }

  EvidenceRecord adjudicate(const std::string& adjudicator, const std::string& example_id,
                            const EvidencePayload& payload) {
    const TaskState st = commit(EventKind::adjudication, adjudicator, example_id, payload);
    if (st.final_record) return *st.final_record;
    return EvidenceRecord{example_id, adjudicator, payload};
  }

  std::vector<TaskView> disagreements() const {
    std::shared_lock lock(mutex_);
    std::vector<TaskView> out;
    for (const auto& [id, st] : states_) {
      if (st.status == TaskStatus::disagreed) out.push_back(make_view(st, true));
    }
    return out;
  }

  // Kappa over exact payload equality of the two pre-adjudication passes.
  // Within a task, the pass by the annotator listed first in the config is
  // side A, so marginals follow people rather than arrival order.
  AgreementReport agreement() const {
    std::shared_lock lock(mutex_);
    auto rank = [this](const std::string& who) {
      return std::find(config_.annotators.begin(), config_.annotators.end(), who) - config_.annotators.begin();
    };
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (const auto& [id, st] : states_) {
      if (st.passes.size() < 2) continue;
      const bool swap = rank(st.passes[1].annotator) < rank(st.passes[0].annotator);
      a.push_back(payload_to_json(st.passes[swap ? 1 : 0].payload).dump());
      b.push_back(payload_to_json(st.passes[swap ? 0 : 1].payload).dump());
    }
    if (a.empty()) throw ConflictError("no doubly-annotated tasks yet");
    return cohen_kappa(a, b);
  }

  std::map<TaskStatus, std::size_t> progress() const {
    std::shared_lock lock(mutex_);
    std::map<TaskStatus, std::size_t> counts;
    for (auto s : {TaskStatus::unassigned, TaskStatus::single_annotated, TaskStatus::double_annotated,
                   TaskStatus::disagreed, TaskStatus::adjudicated, TaskStatus::discarded}) {
      counts[s] = 0;
    }
    for (const auto& [id, st] : states_) ++counts[st.status];
    return counts;
  }

  // Dataset lines in example-id order with final evidence filled in.
  // Discarded examples keep their text but lose the positive choice.
  Dataset merged_dataset() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> pending;
    for (const auto& [id, st] : states_) {
      if (st.status != TaskStatus::double_annotated && st.status != TaskStatus::adjudicated &&
          st.status != TaskStatus::discarded) {
        pending.push_back(id);
      }
    }
    if (!pending.empty()) {
      std::string list;
      for (const auto& id : pending) list += (list.empty() ? "" : ", ") + id;
      throw ConflictError(std::to_string(pending.size()) + " task(s) still pending: " + list);
    }
    Dataset out;
    out.task = dataset_.task;
    std::vector<const Example*> ordered;
    for (const auto& ex : dataset_.examples) ordered.push_back(&ex);
    std::sort(ordered.begin(), ordered.end(),
              [](const Example* x, const Example* y) { return example_id(*x) < example_id(*y); });
    for (const Example* ex : ordered) {
      const std::string& id = example_id(*ex);
      auto st = states_.find(id);
      if (st == states_.end()) {
        out.examples.push_back(*ex);
        if (const auto* rec = dataset_.evidence_for(id)) out.evidence.push_back(*rec);
        continue;
      }
      if (st->second.status == TaskStatus::discarded) {
        auto copy = std::get<ChoiceExample>(*ex);
        copy.positive.reset();
        copy.excluded = true;
        out.examples.push_back(std::move(copy));
        continue;
      }
      const EvidenceRecord& rec = *st->second.final_record;
      if (const auto* c = std::get_if<ChoiceExample>(ex)) {
        const auto& ev = std::get<ChoiceEvidence>(rec.payload);
        if (ev.choice != *c->positive) {
          throw ConflictError("final evidence for \"" + id + "\" names choice " + std::to_string(ev.choice) +
                              " but the positive choice is " + std::to_string(*c->positive));
        }
      }
      out.examples.push_back(*ex);
      out.evidence.push_back(rec);
    }
    return out;
  }

  void export_evidence(const std::string& out_path) const {
    const Dataset merged = merged_dataset();
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + out_path);
    write_dataset(out, merged);
    out.close();
    if (!out) throw Error("I/O failure writing " + out_path);
  }

  std::vector<LogEvent> log() const {
    std::shared_lock lock(mutex_);
    return events_;
  }

  std::map<std::string, TaskState> states() const {
    std::shared_lock lock(mutex_);
    return states_;
  }

  const Dataset& dataset() const { return dataset_; }
  const AnnotationConfig& config() const { return config_; }

 private:
  static std::map<std::string, TaskState> initial_states(const Dataset& ds) {
    std::map<std::string, TaskState> states;
    for (const auto& ex : ds.examples) {
      bool needs_evidence = false;
      if (const auto* e = std::get_if<EntailmentExample>(&ex)) {
        needs_evidence = e->label == EntailmentLabel::entailed;
      } else {
        needs_evidence = is_evaluable(ex);
      }
      if (needs_evidence) states.emplace(example_id(ex), TaskState{example_id(ex), TaskStatus::unassigned, {}, std::nullopt});
    }
    return states;
  }

  static bool authored(const TaskState& st, const std::string& who) {
    return std::any_of(st.passes.begin(), st.passes.end(), [&](const Pass& p) { return p.annotator == who; });
  }

  // The single state transition shared by live commits and replay.
  static void apply(const Dataset& ds, const std::set<std::string>& annotators,
                    const std::set<std::string>& adjudicators, std::map<std::string, TaskState>& states,
                    const LogEvent& e) {
    auto it = states.find(e.example_id);
    if (it == states.end()) {
      if (ds.find(e.example_id) == nullptr) throw Error("unknown example \"" + e.example_id + "\"");
      throw Error("example \"" + e.example_id + "\" does not need evidence annotation");
    }
    TaskState& st = it->second;
    const Example& ex = *ds.find(e.example_id);
    if (auto msg = check_payload(ex, e.payload); !msg.empty()) throw Error(msg);

    if (e.kind == EventKind::submission) {
      if (annotators.count(e.actor) == 0) throw Error("unknown annotator \"" + e.actor + "\"");
      if (authored(st, e.actor)) {
        throw ConflictError("annotator \"" + e.actor + "\" already annotated \"" + e.example_id + "\"");
      }
      if (st.status != TaskStatus::unassigned && st.status != TaskStatus::single_annotated) {
        throw ConflictError("task \"" + e.example_id + "\" is " + std::string(to_string(st.status)) +
                            " and takes no more annotations");
      }
      st.passes.push_back({e.actor, e.payload});
      if (st.passes.size() == 1) {
        st.status = TaskStatus::single_annotated;
      } else if (st.passes[0].payload == st.passes[1].payload) {
        if (std::holds_alternative<BothPlausible>(e.payload)) {
          st.status = TaskStatus::discarded;
        } else {
          st.status = TaskStatus::double_annotated;
          st.final_record = EvidenceRecord{e.example_id, st.passes[0].annotator + "+" + st.passes[1].annotator,
                                           e.payload};
        }
      } else {
        st.status = TaskStatus::disagreed;
      }
      return;
    }

    if (adjudicators.count(e.actor) == 0) throw Error("unknown adjudicator \"" + e.actor + "\"");
    if (st.status != TaskStatus::disagreed) {
      throw ConflictError("task \"" + e.example_id + "\" is " + std::string(to_string(st.status)) +
                          ", not disagreed");
    }
    if (authored(st, e.actor)) {
      throw ConflictError("adjudicator \"" + e.actor + "\" annotated \"" + e.example_id + "\" already");
    }
    if (std::holds_alternative<BothPlausible>(e.payload)) {
      st.status = TaskStatus::discarded;
    } else {
      st.status = TaskStatus::adjudicated;
      st.final_record = EvidenceRecord{e.example_id, e.actor, e.payload};
    }
  }

  // Single-writer commit point: validate against current state, append to the
  // log file, then apply.
  TaskState commit(EventKind kind, const std::string& actor, const std::string& example_id,
                   const EvidencePayload& payload) {
    std::unique_lock lock(mutex_);
    LogEvent e;
    e.seq = static_cast<std::int64_t>(events_.size());
    e.kind = kind;
    e.actor = actor;
    e.example_id = example_id;
    e.payload = payload;
    if (config_.timestamps) e.timestamp = utc_timestamp();

    auto next = states_;
    apply(dataset_, annotators_, adjudicators_, next, e);
    if (log_path_) {
      std::ofstream out(*log_path_, std::ios::binary | std::ios::app);
      out << event_to_json(e).dump() << '\n';
      out.flush();
      if (!out) throw Error("cannot append to annotation log " + log_path_->string());
    }
    events_.push_back(std::move(e));
    states_ = std::move(next);
    return states_.at(example_id);
  }

  TaskView make_view(const TaskState& st, bool with_payloads) const {
    const Example& ex = *dataset_.find(st.example_id);
    TaskView v;
    v.example_id = st.example_id;
    v.task = example_task(ex);
    v.status = st.status;
    v.example = render_for_annotation(ex);
    if (with_payloads) v.payloads = st.passes;
    return v;
  }

  Dataset dataset_;
  AnnotationConfig config_;
  std::optional<std::filesystem::path> log_path_;
  std::set<std::string> annotators_;
  std::set<std::string> adjudicators_;
  mutable std::shared_mutex mutex_;
  std::vector<LogEvent> events_;
  std::map<std::string, TaskState> states_;
};

inline std::string format_kappa(double kappa) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << kappa;
  return "κ = " + s.str();
}

inline ordered_json agreement_to_json(const AgreementReport& r) {
  ordered_json j = ordered_json::object();
  j["kappa"] = r.kappa;
  j["observed"] = r.observed;
  j["expected"] = r.expected;
  j["items"] = r.items;
  j["display"] = format_kappa(r.kappa);
  ordered_json confusion = ordered_json::array();
  for (const auto& [labels, count] : r.confusion) {
    confusion.push_back({{"a", labels.first}, {"b", labels.second}, {"count", count}});
  }
  j["confusion"] = confusion;
  return j;
}

}  // namespace coherencekit
