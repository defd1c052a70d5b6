#pragma once

// Classifier backends. Every backend maps realized sub-span instances to
// probability distributions over classes; builtin reference kinds need the
// gold maps, external kinds only ever see realized text.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "log.hpp"
#include "subprocess.hpp"

// httplib must come after the POSIX headers above.
#include <httplib.h>

namespace coherencekit {

inline constexpr double kProbabilityTolerance = 1e-6;

struct Distribution {
  std::vector<double> probs;
  bool operator==(const Distribution&) const = default;
};

struct PredictionKey {
  std::string example_id;
  SpanRef span;
  auto operator<=>(const PredictionKey&) const = default;
};

inline std::string to_string(const PredictionKey& key) {
  return "{\"id\":" + json(key.example_id).dump() + ",\"start\":" + std::to_string(key.span.start) +
         ",\"end\":" + std::to_string(key.span.end) + "}";
}

// Throws unless `d` is a probability vector over `classes` entries.
// With `renormalize`, a non-negative vector with positive mass is rescaled.
inline void validate_distribution(Distribution& d, int classes, std::string_view context,
                                  bool renormalize = false) {
  if (static_cast<int>(d.probs.size()) != classes) {
    throw BackendError(std::string(context) + ": expected " + std::to_string(classes) +
                       " probabilities, got " + std::to_string(d.probs.size()));
  }
  double sum = 0.0;
  for (double p : d.probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw BackendError(std::string(context) + ": probabilities must be finite and non-negative");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) <= kProbabilityTolerance) return;
  if (renormalize && sum > 0.0) {
    for (double& p : d.probs) p /= sum;
    return;
  }
  throw BackendError(std::string(context) + ": probabilities sum to " + std::to_string(sum) +
                     ", not 1");
}

struct PredictionRequest {
  PredictionKey key;
  TaskInstance instance;
};

// Wire form of one instance. `rid` is only present on the line protocol.
inline ordered_json instance_to_json(const TaskInstance& inst, std::optional<std::int64_t> rid) {
  ordered_json j = ordered_json::object();
  if (rid) j["rid"] = *rid;
  j["task"] = std::string(to_string(inst.task));
  if (inst.task == Task::entailment) {
    j["premise"] = inst.premise;
    j["hypothesis"] = inst.hypothesis;
  } else {
    j["choices"] = inst.choices;
  }
  return j;
}

inline Distribution probs_from_json(const json& j, std::string_view context) {
  if (!j.is_array()) throw BackendError(std::string(context) + ": \"probs\" must be an array");
  Distribution d;
  for (const auto& p : j) {
    if (!p.is_number()) throw BackendError(std::string(context) + ": non-numeric probability");
    d.probs.push_back(p.get<double>());
  }
  return d;
}

// ---------------------------------------------------------------------------

class Backend {
 public:
  virtual ~Backend() = default;

  // One distribution per request, order-aligned. All requests must share a task.
  std::vector<Distribution> predict_batch(std::span<const PredictionRequest> requests) {
    if (requests.empty()) throw Error("predict_batch called with no instances");
    const Task task = requests.front().instance.task;
    for (const auto& r : requests) {
      if (r.instance.task != task) throw Error("predict_batch mixes task types");
    }
    auto out = predict(requests);
    if (out.size() != requests.size()) {
      throw BackendError(name() + " returned " + std::to_string(out.size()) + " distributions for " +
                         std::to_string(requests.size()) + " instances");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      validate_distribution(out[i], requests[i].instance.class_count(),
                            name() + " " + to_string(requests[i].key), renormalize_);
    }
    return out;
  }

  // Upper bound on concurrent predict_batch calls; 0 means unbounded.
  virtual int max_in_flight() const { return 0; }
  virtual std::string name() const = 0;

  void set_renormalize(bool on) { renormalize_ = on; }

 protected:
  virtual std::vector<Distribution> predict(std::span<const PredictionRequest> requests) = 0;

 private:
  bool renormalize_ = false;
};

enum class BackendKind {
  oracle,
  majority,
  uniform_random,
  noisy_oracle,
  endpoint_adversary,
  file,
  subprocess,
  http,
};

struct BackendConfig {
  BackendKind kind = BackendKind::oracle;
  int majority_class = 1;  // 1-based; entailment classes are [not_entailed, entailed]
  std::uint64_t seed = 0;
  double flip_prob = 0.0;
  double sharpness = 0.9;
  std::string path;     // file
  std::string command;  // subprocess
  std::string url;      // http
  int batch_size = 32;
  std::chrono::milliseconds timeout{30000};
  int retries = 3;
  std::chrono::milliseconds backoff{200};
  int max_in_flight = 4;  // http only
  bool renormalize = false;

  std::string spec;  // the string this config was parsed from, for reports
};

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    parts.emplace_back(s.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

inline double parse_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("invalid " + std::string(what) + " \"" + s + "\"");
  }
}

inline std::uint64_t parse_u64(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("invalid " + std::string(what) + " \"" + s + "\"");
  }
}

}  // namespace detail

// Parses "oracle", "majority:<class>", "uniform_random:<seed>",
// "noisy_oracle:<seed>:<flip_prob>:<sharpness>", "endpoint_adversary",
// "file:<path>", "subprocess:<command>", "http:<url>".
inline BackendConfig parse_backend_spec(std::string_view spec) {
  BackendConfig cfg;
  cfg.spec = std::string(spec);
  const auto colon = spec.find(':');
  const std::string kind(spec.substr(0, colon));
  const std::string rest = colon == std::string_view::npos ? "" : std::string(spec.substr(colon + 1));
  auto need_rest = [&] {
    if (rest.empty()) throw Error("backend \"" + kind + "\" needs a parameter");
  };
  if (kind == "oracle") {
    cfg.kind = BackendKind::oracle;
  } else if (kind == "endpoint_adversary") {
    cfg.kind = BackendKind::endpoint_adversary;
  } else if (kind == "majority") {
    need_rest();
    cfg.kind = BackendKind::majority;
    if (rest == "not_entailed") {
      cfg.majority_class = 1;
    } else if (rest == "entailed") {
      cfg.majority_class = 2;
    } else {
      cfg.majority_class = static_cast<int>(detail::parse_u64(rest, "majority class"));
    }
  } else if (kind == "uniform_random") {
    need_rest();
    cfg.kind = BackendKind::uniform_random;
    cfg.seed = detail::parse_u64(rest, "seed");
  } else if (kind == "noisy_oracle") {
    need_rest();
    cfg.kind = BackendKind::noisy_oracle;
    auto parts = detail::split(rest, ':');
    if (parts.size() != 3) throw Error("noisy_oracle expects <seed>:<flip_prob>:<sharpness>");
    cfg.seed = detail::parse_u64(parts[0], "seed");
    cfg.flip_prob = detail::parse_double(parts[1], "flip probability");
    cfg.sharpness = detail::parse_double(parts[2], "sharpness");
  } else if (kind == "file") {
    need_rest();
    cfg.kind = BackendKind::file;
    cfg.path = rest;
  } else if (kind == "subprocess") {
    need_rest();
    cfg.kind = BackendKind::subprocess;
    cfg.command = rest;
  } else if (kind == "http") {
    need_rest();
    cfg.kind = BackendKind::http;
    cfg.url = rest;
  } else {
    throw Error("unknown backend kind \"" + kind + "\"");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Builtin reference backends

// The distribution a perfectly coherent classifier would emit for `gold`.
inline Distribution gold_distribution(const SpanGold& gold, int classes) {
  Distribution d{std::vector<double>(static_cast<std::size_t>(classes), 0.0)};
  switch (gold.expect) {
    case Expectation::not_entailed: d.probs[0] = 1.0; break;
    case Expectation::entailed: d.probs[1] = 1.0; break;
    case Expectation::confident_on: d.probs[static_cast<std::size_t>(gold.choice - 1)] = 1.0; break;
    case Expectation::non_confident:
      for (double& p : d.probs) p = 1.0 / classes;
      break;
  }
  return d;
}

class GoldBackedBackend : public Backend {
 public:
  explicit GoldBackedBackend(const GoldIndex& gold) : gold_(gold) {}

 protected:
  const SpanGold& gold_for(const PredictionKey& key) const {
    auto ex = gold_.find(key.example_id);
    if (ex == gold_.end()) throw BackendError("no gold for example \"" + key.example_id + "\"");
    auto span = ex->second.find(key.span);
    if (span == ex->second.end()) throw BackendError("no gold for " + to_string(key));
    return span->second;
  }

  const GoldIndex& gold_;
};

class OracleBackend final : public GoldBackedBackend {
 public:
  using GoldBackedBackend::GoldBackedBackend;
  std::string name() const override { return "oracle"; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (const auto& r : requests) out.push_back(gold_distribution(gold_for(r.key), r.instance.class_count()));
    return out;
  }
};

// Perfect on the full span; on every proper sub-span it answers the fixed
// positive class (entailment: "entailed"; choice: choice 1) with certainty.
class EndpointAdversaryBackend final : public GoldBackedBackend {
 public:
  using GoldBackedBackend::GoldBackedBackend;
  std::string name() const override { return "endpoint_adversary"; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (const auto& r : requests) {
      const int classes = r.instance.class_count();
      const auto& gold = gold_for(r.key);
      const auto& spans = gold_.at(r.key.example_id);
      const SpanRef full{1, spans.rbegin()->first.end};
      if (r.key.span == full) {
        out.push_back(gold_distribution(gold, classes));
        continue;
      }
      Distribution d{std::vector<double>(static_cast<std::size_t>(classes), 0.0)};
      d.probs[r.instance.task == Task::entailment ? 1 : 0] = 1.0;
      out.push_back(std::move(d));
    }
    return out;
  }
};

class MajorityBackend final : public Backend {
 public:
  explicit MajorityBackend(int cls) : cls_(cls) {
    if (cls_ < 1) throw Error("majority class must be >= 1");
  }
  std::string name() const override { return "majority"; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (const auto& r : requests) {
      const int classes = r.instance.class_count();
      if (cls_ > classes) {
        throw Error("majority class " + std::to_string(cls_) + " exceeds class count " + std::to_string(classes));
      }
      Distribution d{std::vector<double>(static_cast<std::size_t>(classes), 0.0)};
      d.probs[static_cast<std::size_t>(cls_ - 1)] = 1.0;
      out.push_back(std::move(d));
    }
    return out;
  }

 private:
  int cls_;
};

// Uniform over the probability simplex (normalized exponentials), keyed by
// (seed, example id, span).
class UniformRandomBackend final : public Backend {
 public:
  explicit UniformRandomBackend(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "uniform_random"; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (const auto& r : requests) {
      KeyedRng rng(seed_, r.key.example_id, r.key.span.start, r.key.span.end);
      Distribution d;
      double sum = 0.0;
      for (int c = 0; c < r.instance.class_count(); ++c) {
        const double e = -std::log1p(-rng.next_double());
        d.probs.push_back(e);
        sum += e;
      }
      if (sum <= 0.0) {
        for (double& p : d.probs) p = 1.0 / static_cast<double>(d.probs.size());
      } else {
        for (double& p : d.probs) p /= sum;
      }
      out.push_back(std::move(d));
    }
    return out;
  }

 private:
  std::uint64_t seed_;
};

// Soft gold: the gold class gets `sharpness`, the rest share the remainder.
// With probability `flip_prob` the mass moves to a different class instead.
// Spans that demand non-confidence get a uniform distribution unless flipped.
class NoisyOracleBackend final : public GoldBackedBackend {
 public:
  NoisyOracleBackend(const GoldIndex& gold, std::uint64_t seed, double flip_prob, double sharpness)
      : GoldBackedBackend(gold), seed_(seed), flip_prob_(flip_prob), sharpness_(sharpness) {
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw Error("flip_prob must lie in [0, 1]");
    if (!(sharpness > 0.5 && sharpness <= 1.0)) throw Error("sharpness must lie in (0.5, 1]");
  }
  std::string name() const override { return "noisy_oracle"; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (const auto& r : requests) {
      const int classes = r.instance.class_count();
      const auto& gold = gold_for(r.key);
      KeyedRng rng(seed_, r.key.example_id, r.key.span.start, r.key.span.end);
      const bool flip = rng.next_double() < flip_prob_;
      int target = -1;  // 0-based
      switch (gold.expect) {
        case Expectation::not_entailed: target = 0; break;
        case Expectation::entailed: target = 1; break;
        case Expectation::confident_on: target = gold.choice - 1; break;
        case Expectation::non_confident: target = -1; break;
      }
      if (flip) {
        if (target < 0) {
          target = rng.next_below(classes);
        } else {
          const int other = rng.next_below(classes - 1);
          target = other >= target ? other + 1 : other;
        }
      }
      Distribution d;
      if (target < 0) {
        d.probs.assign(static_cast<std::size_t>(classes), 1.0 / classes);
      } else {
        d.probs.assign(static_cast<std::size_t>(classes), (1.0 - sharpness_) / (classes - 1));
        d.probs[static_cast<std::size_t>(target)] = sharpness_;
      }
      out.push_back(std::move(d));
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  double flip_prob_;
  double sharpness_;
};

// ---------------------------------------------------------------------------
// External backends

using PredictionTable = std::map<PredictionKey, Distribution>;

inline ordered_json prediction_row(const PredictionKey& key, const Distribution& d) {
  ordered_json row = ordered_json::object();
  row["id"] = key.example_id;
  row["start"] = key.span.start;
  row["end"] = key.span.end;
  row["probs"] = d.probs;
  return row;
}

// Reads a prediction file eagerly; every row must already be normalized
// unless `renormalize` is set. Class counts are checked at lookup.
inline PredictionTable load_prediction_file(const std::string& path, bool renormalize = false) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prediction file " + path);
  PredictionTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(where + ": malformed JSON: " + e.what());
    }
    PredictionKey key;
    Distribution d;
    try {
      key.example_id = detail::string_field(j, "id");
      key.span = {detail::int_field(j, "start"), detail::int_field(j, "end")};
      d = probs_from_json(detail::field(j, "probs"), where);
      validate_distribution(d, static_cast<int>(d.probs.size()), where, renormalize);
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    if (!table.emplace(key, std::move(d)).second) {
      throw Error(where + ": duplicate prediction for " + to_string(key));
    }
  }
  return table;
}

class FileBackend final : public Backend {
 public:
  FileBackend(const std::string& path, bool renormalize)
      : path_(path), table_(load_prediction_file(path, renormalize)) {}
  std::string name() const override { return "file"; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (const auto& r : requests) {
      auto it = table_.find(r.key);
      if (it == table_.end()) throw BackendError(path_ + ": no prediction for key " + to_string(r.key));
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::string path_;
  PredictionTable table_;
};

// Line protocol over a child's stdin/stdout; responses may arrive in any
// order and are matched back by rid. One batch in flight at a time.
class SubprocessBackend final : public Backend {
 public:
  SubprocessBackend(const std::string& command, std::chrono::milliseconds timeout)
      : command_(command), timeout_(timeout), child_(command) {}
  std::string name() const override { return "subprocess"; }
  int max_in_flight() const override { return 1; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::lock_guard lock(mutex_);
    const std::int64_t first = next_rid_;
    std::string out;
    for (const auto& r : requests) out += instance_to_json(r.instance, next_rid_++).dump() + "\n";

    std::vector<std::optional<Distribution>> results(requests.size());
    std::size_t answered = 0;
    auto on_line = [&](const std::string& line) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        throw BackendError("malformed response line from subprocess: " + line);
      }
      if (!j.is_object() || !j.contains("rid") || !j["rid"].is_number_integer()) {
        throw BackendError("response line without integer rid: " + line);
      }
      const std::int64_t rid = j["rid"].get<std::int64_t>();
      if (rid < first || rid >= next_rid_) throw BackendError("response for unknown rid " + std::to_string(rid));
      auto& slot = results[static_cast<std::size_t>(rid - first)];
      if (slot) throw BackendError("duplicate response for rid " + std::to_string(rid));
      if (j.contains("error")) {
        throw BackendError("subprocess reported an error for rid " + std::to_string(rid) + ": " + j["error"].dump());
      }
      if (!j.contains("probs")) throw BackendError("response line without probs: " + line);
      slot = probs_from_json(j["probs"], "rid " + std::to_string(rid));
      ++answered;
    };
    child_.exchange(out, on_line, [&] { return answered == requests.size(); }, timeout_);

    std::vector<Distribution> dists;
    for (auto& r : results) dists.push_back(std::move(*r));
    return dists;
  }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  ChildProcess child_;
  std::mutex mutex_;
  std::int64_t next_rid_ = 0;
};

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("URL must include a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, slash);
  out.path_prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

// POST {url}/v1/predict with {"instances": [...]} -> {"probs": [[...], ...]}.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const BackendConfig& cfg) : cfg_(cfg), url_(parse_url(cfg.url)) {
    if (cfg_.batch_size < 1) throw Error("batch size must be >= 1");
    if (cfg_.retries < 0) throw Error("retries must be >= 0");
    if (cfg_.max_in_flight < 1) throw Error("max in-flight batches must be >= 1");
  }
  std::string name() const override { return "http"; }
  int max_in_flight() const override { return cfg_.max_in_flight; }

 protected:
  std::vector<Distribution> predict(std::span<const PredictionRequest> requests) override {
    std::vector<Distribution> out;
    for (std::size_t i = 0; i < requests.size(); i += static_cast<std::size_t>(cfg_.batch_size)) {
      auto chunk = requests.subspan(i, std::min(requests.size() - i, static_cast<std::size_t>(cfg_.batch_size)));
      auto dists = post_batch(chunk);
      for (auto& d : dists) out.push_back(std::move(d));
    }
    return out;
  }

 private:
  std::vector<Distribution> post_batch(std::span<const PredictionRequest> chunk) {
    ordered_json body = ordered_json::object();
    body["instances"] = ordered_json::array();
    for (const auto& r : chunk) body["instances"].push_back(instance_to_json(r.instance, std::nullopt));
    const std::string payload = body.dump();
    const std::string path = url_.path_prefix + "/v1/predict";

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
      httplib::Client client(url_.scheme_host_port);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      auto res = client.Post(path, payload, "application/json");
      if (!res) {
        last_error = "request to " + cfg_.url + path + " failed: " + httplib::to_string(res.error());
      } else if (res->status < 200 || res->status >= 300) {
        last_error = cfg_.url + path + " answered HTTP " + std::to_string(res->status);
      } else {
        return parse_response(res->body, chunk.size());
      }
      log::warn(last_error, " (attempt ", attempt + 1, " of ", cfg_.retries + 1, ")");
    }
    throw BackendError(last_error);
  }

  std::vector<Distribution> parse_response(const std::string& body, std::size_t expected) const {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error&) {
      throw BackendError("malformed JSON response from " + cfg_.url);
    }
    if (!j.is_object() || !j.contains("probs") || !j["probs"].is_array()) {
      throw BackendError("response from " + cfg_.url + " lacks a \"probs\" array");
    }
    if (j["probs"].size() != expected) {
      throw BackendError("response from " + cfg_.url + " has " + std::to_string(j["probs"].size()) +
                         " rows for " + std::to_string(expected) + " instances");
    }
    std::vector<Distribution> out;
    for (const auto& row : j["probs"]) out.push_back(probs_from_json(row, cfg_.url));
    return out;
  }

  BackendConfig cfg_;
  ParsedUrl url_;
};

// `gold` must outlive the backend for the oracle, noisy_oracle and
// endpoint_adversary kinds.
inline std::unique_ptr<Backend> open_backend(const BackendConfig& cfg, const GoldIndex* gold = nullptr) {
  auto need_gold = [&](std::string_view kind) -> const GoldIndex& {
    if (gold == nullptr) throw Error(std::string(kind) + " backend needs gold annotations");
    return *gold;
  };
  std::unique_ptr<Backend> backend;
  switch (cfg.kind) {
    case BackendKind::oracle: backend = std::make_unique<OracleBackend>(need_gold("oracle")); break;
    case BackendKind::endpoint_adversary:
      backend = std::make_unique<EndpointAdversaryBackend>(need_gold("endpoint_adversary"));
      break;
    case BackendKind::noisy_oracle:
      backend = std::make_unique<NoisyOracleBackend>(need_gold("noisy_oracle"), cfg.seed, cfg.flip_prob, cfg.sharpness);
      break;
    case BackendKind::majority: backend = std::make_unique<MajorityBackend>(cfg.majority_class); break;
    case BackendKind::uniform_random: backend = std::make_unique<UniformRandomBackend>(cfg.seed); break;
    case BackendKind::file: backend = std::make_unique<FileBackend>(cfg.path, cfg.renormalize); break;
    case BackendKind::subprocess: backend = std::make_unique<SubprocessBackend>(cfg.command, cfg.timeout); break;
    case BackendKind::http: backend = std::make_unique<HttpBackend>(cfg); break;
  }
  if (cfg.kind == BackendKind::file || cfg.kind == BackendKind::subprocess || cfg.kind == BackendKind::http) {
    backend->set_renormalize(cfg.renormalize);
  }
  return backend;
}

}  // namespace coherencekit
