#include <gtest/gtest.h>

#include <coherencekit/cli.hpp>

#include "support.hpp"

using namespace testing_support;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "coherencekit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = coherencekit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, Spans) {
  const auto r = cli({"spans", "--n", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "(1,1)\n(1,2)\n(1,3)\n(1,4)\n(2,2)\n(2,3)\n(2,4)\n(3,3)\n(3,4)\n(4,4)\ncount: 10\n");
  EXPECT_EQ(cli({"spans", "--n", "0"}).code, 1);
}

TEST(Cli, HelpAndBadArguments) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"evaluate"}).code, 1);
  EXPECT_EQ(cli({"evaluate", "--dataset", data_file("synthetic_choice.jsonl"), "--rho", "1.5"}).code, 1);
  const auto mode = cli({"evaluate", "--dataset", data_file("synthetic_choice.jsonl"), "--mode", "median"});
  EXPECT_EQ(mode.code, 1);
  EXPECT_NE(mode.err.find("median"), std::string::npos);
}

TEST(Cli, EvaluateOracleWritesReport) {
  TempDir dir;
  const auto r = cli({"evaluate", "--dataset", data_file("synthetic_choice.jsonl"), "--report", dir.file("r.json"),
                      "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("oracle"), std::string::npos);
  EXPECT_NE(r.out.find("100.0 (+0.0)"), std::string::npos);
  const auto j = nlohmann::json::parse(read_text(dir.file("r.json")));
  EXPECT_EQ(j["accuracy"].get<double>(), 1.0);
  EXPECT_EQ(j["strict"].get<double>(), 1.0);
  EXPECT_EQ(j["lenient_macro"].get<double>(), 1.0);
  EXPECT_EQ(j["lenient_micro"].get<double>(), 1.0);
  EXPECT_FALSE(j.contains("timestamp"));
  EXPECT_EQ(j["config"]["backend"], "oracle");
}

TEST(Cli, WrongTaskAndMissingDataset) {
  EXPECT_EQ(cli({"evaluate", "--dataset", data_file("synthetic_choice.jsonl"), "--task", "entailment"}).code, 1);
  const auto r = cli({"evaluate", "--dataset", "/nonexistent.jsonl"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent.jsonl"), std::string::npos);
}

TEST(Cli, BackendFailureExitsTwo) {
  const auto r = cli({"evaluate", "--dataset", fixture("protocol/entailment.jsonl"), "--backend",
                      std::string("subprocess:") + COHERENCEKIT_STUB_CHILD + " --error-rid 0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  const auto missing = cli({"evaluate", "--dataset", fixture("protocol/entailment.jsonl"), "--backend",
                            "file:" + fixture("protocol/predictions_choice.jsonl")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("no prediction for key"), std::string::npos);
}

TEST(Cli, UnreadablePredictionFileIsInputError) {
  EXPECT_EQ(cli({"evaluate", "--dataset", fixture("protocol/entailment.jsonl"), "--backend", "file:/nonexistent"}).code,
            1);
}

TEST(Cli, WorkerCountDoesNotChangeReport) {
  TempDir dir;
  for (const char* w : {"1", "8"}) {
    const auto r = cli({"sweep", "--dataset", data_file("synthetic_choice.jsonl"), "--backend", "noisy_oracle:3:0.2:0.7",
                        "--workers", w, "--batch-size", "5", "--no-timestamp", "--report",
                        dir.file(std::string("w") + w + ".json")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_text(dir.file("w1.json")), read_text(dir.file("w8.json")));
}

TEST(Cli, CacheThenSweepFromFile) {
  TempDir dir;
  const auto cached = cli({"cache", "--dataset", data_file("synthetic_choice.jsonl"), "--backend",
                           "noisy_oracle:5:0.1:0.8", "--out", dir.file("preds.jsonl")});
  ASSERT_EQ(cached.code, 0) << cached.err;
  EXPECT_EQ(cached.out.rfind("wrote ", 0), 0u);
  const auto r = cli({"sweep", "--dataset", data_file("synthetic_choice.jsonl"), "--backend",
                      "file:" + dir.file("preds.jsonl"), "--model-name", "cached", "--grid", "0.1:0.3:0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("Model", 0), 0u);
  EXPECT_NE(r.out.find("ρ"), std::string::npos);
  EXPECT_NE(r.out.find("cached"), std::string::npos);
}

TEST(Cli, McNemarFromReportAndCounts) {
  TempDir dir;
  ASSERT_EQ(cli({"evaluate", "--dataset", data_file("adversary_entailment.jsonl"), "--backend", "endpoint_adversary",
                 "--report", dir.file("adv.json")})
                .code,
            0);
  const auto r = cli({"stats", "mcnemar", "--report", dir.file("adv.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "b: 10\nc: 0\nexact p: 0.00195\n");
  const auto none = cli({"stats", "mcnemar", "--b", "0", "--c", "0", "--chi2"});
  EXPECT_EQ(none.out, "b: 0\nc: 0\nexact p: 1\nnote: no discordant pairs\nchi2 p: 1\n");
  EXPECT_EQ(cli({"stats", "mcnemar", "--b", "3"}).code, 1);

  const auto rendered = cli({"report", "render", "--report", dir.file("adv.json"), "--report", dir.file("adv.json"),
                             "--format", "csv"});
  ASSERT_EQ(rendered.code, 0) << rendered.err;
  EXPECT_EQ(rendered.out,
            "model,accuracy,strict,strict_delta,strict_rho,lenient,lenient_delta,lenient_rho,mcnemar_p\n"
            "endpoint_adversary,100.0,50.0,-50.0,,58.3,-41.7,,0.00195\n"
            "endpoint_adversary,100.0,50.0,-50.0,,58.3,-41.7,,0.00195\n");
}

TEST(Cli, Kappa) {
  TempDir dir;
  write_text(dir.file("a.jsonl"),
             "{\"id\":\"1\",\"label\":\"E\"}\n{\"id\":\"2\",\"label\":\"E\"}\n{\"id\":\"3\",\"label\":\"N\"}\n"
             "{\"id\":\"4\",\"label\":\"N\"}\n");
  write_text(dir.file("b.jsonl"),
             "{\"id\":\"4\",\"label\":\"N\"}\n{\"id\":\"3\",\"label\":\"N\"}\n{\"id\":\"2\",\"label\":\"N\"}\n"
             "{\"id\":\"1\",\"label\":\"E\"}\n");
  const auto r = cli({"stats", "kappa", "--a", dir.file("a.jsonl"), "--b", dir.file("b.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "κ = 0.50\nitems: 4\nobserved agreement: 0.75\nexpected agreement: 0.5\n");
  write_text(dir.file("c.jsonl"), "{\"id\":\"1\",\"label\":\"E\"}\n");
  EXPECT_EQ(cli({"stats", "kappa", "--a", dir.file("a.jsonl"), "--b", dir.file("c.jsonl")}).code, 1);
}

TEST(Cli, AnnotateExport) {
  TempDir dir;
  std::ostringstream text;
  coherencekit::write_dataset(text, annotation_fixture());
  write_text(dir.file("ds.jsonl"), text.str());
  {
    coherencekit::AnnotationStore store(annotation_fixture(), {{"a1", "a2"}, {"adj"}, false},
                                        std::filesystem::path(dir.file("log.jsonl")));
    run_two_annotator_passes(store);
  }
  const std::vector<std::string> base{"annotate", "export", "--dataset", dir.file("ds.jsonl"), "--store",
                                      dir.file("log.jsonl"), "--annotators", "a1,a2", "--adjudicators", "adj",
                                      "--out", dir.file("out.jsonl")};
  const auto pending = cli(base);
  EXPECT_EQ(pending.code, 1);
  EXPECT_NE(pending.err.find("art-05"), std::string::npos);
  {
    coherencekit::AnnotationStore store(annotation_fixture(), {{"a1", "a2"}, {"adj"}, false},
                                        std::filesystem::path(dir.file("log.jsonl")));
    run_adjudication(store);
  }
  const auto r = cli(base);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "exported 10 examples to " + dir.file("out.jsonl") + "\n");
  EXPECT_EQ(read_lines(dir.file("out.jsonl")).size(), 10u);
}
