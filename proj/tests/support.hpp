#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <coherencekit/annotation.hpp>
#include <coherencekit/backend.hpp>
#include <coherencekit/corpus.hpp>

#include "toy_model.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("coherencekit-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline std::string fixture(const std::string& name) { return std::string(COHERENCEKIT_FIXTURE_DIR) + "/" + name; }
inline std::string data_file(const std::string& name) { return std::string(COHERENCEKIT_DATA_DIR) + "/" + name; }

inline coherencekit::Dataset parse_string(const std::string& text) {
  std::istringstream in(text);
  return coherencekit::parse_dataset(in, "<test>");
}

// Ten two-choice stories of three sentences, choice 1 implausible, no
// evidence yet: the input to a scripted annotation session.
inline coherencekit::Dataset annotation_fixture() {
  using namespace coherencekit;
  Dataset ds;
  ds.task = Task::choice;
  for (int i = 1; i <= 10; ++i) {
    ChoiceExample ex;
    ex.id = "art-" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    for (int c = 1; c <= 2; ++c) {
      std::vector<Unit> story;
      for (int s = 1; s <= 3; ++s) {
        story.push_back({std::nullopt, "story " + std::to_string(i) + " choice " + std::to_string(c) + " sentence " +
                                           std::to_string(s)});
      }
      ex.choices.push_back(story);
    }
    ex.positive = 1;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// Payloads of the scripted session. P and Q are two readings of the same
// story; R is what the adjudicator writes for art-08.
inline const coherencekit::EvidencePayload kP = coherencekit::ChoiceEvidence{1, {2}, coherencekit::EvidenceCase::malformed};
inline const coherencekit::EvidencePayload kQ =
    coherencekit::ChoiceEvidence{1, {2, 3}, coherencekit::EvidenceCase::conflict_with_context};
inline const coherencekit::EvidencePayload kR =
    coherencekit::ChoiceEvidence{1, {1, 3}, coherencekit::EvidenceCase::context_conflict_unresolved};
inline const coherencekit::EvidencePayload kBoth = coherencekit::BothPlausible{};

// Two annotators over annotation_fixture():
//   art-01,02,04,06,07: both P    art-09,10: both Q    art-03: both both-plausible
//   art-05: a1 P, a2 Q (a2 first) art-08: a1 both-plausible, a2 P
// Side A (a1) = P x6, Q x2, BP x2; side B (a2) = P x6, Q x3, BP x1.
// p_o = 8/10, p_e = (36 + 6 + 2)/100, kappa = 0.36/0.56 = 9/14.
inline void run_two_annotator_passes(coherencekit::AnnotationStore& store) {
  using coherencekit::EvidencePayload;
  auto both = [&](const std::string& id, const EvidencePayload& p) {
    store.submit("a1", id, p);
    store.submit("a2", id, p);
  };
  for (const char* id : {"art-01", "art-02", "art-04", "art-06", "art-07"}) both(id, kP);
  both("art-09", kQ);
  both("art-10", kQ);
  both("art-03", kBoth);
  store.submit("a2", "art-05", kQ);
  store.submit("a1", "art-05", kP);
  store.submit("a1", "art-08", kBoth);
  store.submit("a2", "art-08", kP);
}

inline constexpr double kScriptedKappa = 9.0 / 14.0;

inline void run_adjudication(coherencekit::AnnotationStore& store) {
  store.adjudicate("adj", "art-05", kP);
  store.adjudicate("adj", "art-08", kR);
}

// In-process POST /v1/predict server answering with the toy model. The first
// `fail_first` requests get `fail_status`; every body is recorded.
class StubHttpServer {
 public:
  explicit StubHttpServer(int fail_first = 0, int fail_status = 503, std::string prefix = "")
      : fail_first_(fail_first), fail_status_(fail_status) {
    server_.Post(prefix + "/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
      int n;
      {
        std::lock_guard lock(mutex_);
        bodies_.push_back(req.body);
        n = static_cast<int>(bodies_.size());
      }
      if (n <= fail_first_) {
        res.status = fail_status_;
        res.set_content("{\"error\":\"try later\"}", "application/json");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::ordered_json out;
      out["probs"] = nlohmann::ordered_json::array();
      for (const auto& inst : body.at("instances")) out["probs"].push_back(toy::probs_for(inst));
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubHttpServer() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  int fail_first_;
  int fail_status_;
  mutable std::mutex mutex_;
  std::vector<std::string> bodies_;
};

}  // namespace testing_support
