#pragma once

// The coherencekit command line. Every subcommand is a thin composition of
// library calls; run() is separate from main() so tests can drive it.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "annotation.hpp"
#include "annotation_server.hpp"
#include "backend.hpp"
#include "corpus.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "report.hpp"
#include "stats.hpp"

namespace coherencekit::cli {

struct RunOptions {
  std::string dataset;
  std::string task;  // empty: inferred from the file
  std::string backend = "oracle";
  std::string model;
  double rho = 0.5;
  std::string grid = "0.05:0.95:0.05";
  std::string mode = "literal_max";
  int workers = 1;
  int batch_size = 32;
  double timeout_s = 30.0;
  int retries = 3;
  int max_in_flight = 4;
  bool renormalize = false;
  std::optional<std::uint64_t> seed;
  std::string report_path;
  std::string out_path;
  std::string format = "plain";
  bool no_timestamp = false;
};

inline void add_run_options(CLI::App* cmd, RunOptions& o, bool with_backend_tuning = true) {
  cmd->add_option("--dataset", o.dataset, "Dataset file (JSON lines)")->required();
  cmd->add_option("--task", o.task, "Expected task: entailment or choice");
  cmd->add_option("--backend", o.backend,
                  "oracle | majority:<class> | uniform_random:<seed> | noisy_oracle:<seed>:<flip>:<sharpness> | "
                  "endpoint_adversary | file:<path> | subprocess:<command> | http:<url>");
  cmd->add_option("--seed", o.seed, "Seed override for randomized builtin backends");
  cmd->add_option("--workers", o.workers, "Concurrent prediction batches")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", o.batch_size, "Instances per backend request")->check(CLI::PositiveNumber);
  if (with_backend_tuning) {
    cmd->add_option("--timeout", o.timeout_s, "Backend timeout in seconds");
    cmd->add_option("--retries", o.retries, "HTTP retries after the first attempt");
    cmd->add_option("--max-in-flight", o.max_in_flight, "HTTP batches in flight")->check(CLI::PositiveNumber);
    cmd->add_flag("--renormalize", o.renormalize, "Rescale external distributions that do not sum to 1");
  }
}

inline BackendConfig backend_config(const RunOptions& o) {
  BackendConfig cfg = parse_backend_spec(o.backend);
  if (o.seed) cfg.seed = *o.seed;
  cfg.batch_size = o.batch_size;
  cfg.timeout = std::chrono::milliseconds(static_cast<long>(o.timeout_s * 1000.0));
  cfg.retries = o.retries;
  cfg.max_in_flight = o.max_in_flight;
  cfg.renormalize = o.renormalize;
  return cfg;
}

inline Dataset load_for(const RunOptions& o) {
  std::optional<Task> task;
  if (!o.task.empty()) task = parse_task(o.task);
  return load_dataset(o.dataset, task);
}

// Everything that determines the numbers in a report. Worker count is left
// out: it never changes results, and reports must be byte-identical across it.
inline ordered_json run_config_json(const RunOptions& o, const Dataset& ds, bool sweep) {
  ordered_json j = ordered_json::object();
  j["dataset"] = o.dataset;
  j["task"] = std::string(to_string(ds.task));
  j["backend"] = o.backend;
  if (o.seed) j["seed"] = *o.seed;
  j["mode"] = o.mode;
  if (sweep) {
    j["grid"] = o.grid;
  } else if (ds.task == Task::choice) {
    j["rho"] = o.rho;
  }
  j["batch_size"] = o.batch_size;
  if (o.renormalize) j["renormalize"] = true;
  return j;
}

struct Prepared {
  Dataset dataset;
  GoldIndex gold;
  PredictionTable predictions;
};

inline Prepared prepare(const RunOptions& o) {
  Prepared p;
  p.dataset = load_for(o);
  p.gold = derive_gold_index(p.dataset);
  auto backend = open_backend(backend_config(o), &p.gold);
  p.predictions = collect_predictions(p.dataset, *backend, {o.workers, o.batch_size});
  return p;
}

inline void finish_report(RunReport& rep, const RunOptions& o, std::ostream& out) {
  if (!o.no_timestamp) rep.timestamp = utc_timestamp();
  if (!o.report_path.empty()) emit_json(rep, o.report_path);
  out << render_table({row_from_report(rep)}, parse_table_format(o.format));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : detail::split(s, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Label files for `stats kappa`: one {"id": ..., "label": ...} per line.
inline std::map<std::string, std::string> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path);
  std::map<std::string, std::string> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    try {
      const json j = json::parse(line);
      const json& label = detail::field(j, "label");
      if (!labels.emplace(detail::string_field(j, "id"), label.is_string() ? label.get<std::string>() : label.dump())
               .second) {
        throw Error("duplicate id");
      }
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Prediction coherence evaluation for discourse-level text classifiers", "coherencekit"};
  app.require_subcommand(1);

  // spans
  int span_n = 0;
  auto* spans = app.add_subcommand("spans", "List the consecutive sub-spans of an n-unit text");
  spans->add_option("--n", span_n, "Number of units")->required();

  // evaluate / sweep / cache
  RunOptions eval_opts;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Accuracy and coherence of one backend at one threshold");
  add_run_options(evaluate_cmd, eval_opts);
  evaluate_cmd->add_option("--rho", eval_opts.rho, "Confidence threshold (choice tasks)")->check(CLI::Range(0.0, 1.0));
  evaluate_cmd->add_option("--mode", eval_opts.mode, "literal_max or runner_up_margin");
  evaluate_cmd->add_option("--model-name", eval_opts.model, "Row label in tables and reports");
  evaluate_cmd->add_option("--report", eval_opts.report_path, "Write the JSON report here");
  evaluate_cmd->add_option("--format", eval_opts.format, "plain, markdown or csv");
  evaluate_cmd->add_flag("--no-timestamp", eval_opts.no_timestamp, "Omit the timestamp from the report");

  RunOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Coherence over a grid of confidence thresholds (choice tasks)");
  add_run_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--grid", sweep_opts.grid, "start:stop:step, inclusive");
  sweep_cmd->add_option("--mode", sweep_opts.mode, "literal_max or runner_up_margin");
  sweep_cmd->add_option("--model-name", sweep_opts.model, "Row label in tables and reports");
  sweep_cmd->add_option("--report", sweep_opts.report_path, "Write the JSON report here");
  sweep_cmd->add_option("--format", sweep_opts.format, "plain, markdown or csv");
  sweep_cmd->add_flag("--no-timestamp", sweep_opts.no_timestamp, "Omit the timestamp from the report");

  RunOptions cache_opts;
  auto* cache_cmd = app.add_subcommand("cache", "Write a backend's predictions for every sub-span to a file");
  add_run_options(cache_cmd, cache_opts);
  cache_cmd->add_option("--out", cache_opts.out_path, "Prediction file to write")->required();

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Evidence annotation workflow");
  annotate->require_subcommand(1);
  std::string ann_dataset;
  std::string ann_store;
  std::string ann_annotators = "a1,a2";
  std::string ann_adjudicators = "adj";
  bool ann_no_timestamp = false;
  auto add_store_options = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", ann_dataset, "Dataset to annotate")->required();
    cmd->add_option("--store", ann_store, "Append-only annotation log")->required();
    cmd->add_option("--annotators", ann_annotators, "Comma-separated annotator ids");
    cmd->add_option("--adjudicators", ann_adjudicators, "Comma-separated adjudicator ids");
  };
  auto* serve = annotate->add_subcommand("serve", "Serve the annotation HTTP API and UI");
  add_store_options(serve);
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string ui_dir;
  serve->add_option("--port", port, "Listen port");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--ui-dir", ui_dir, "Directory of static UI files served at /");
  serve->add_flag("--no-timestamp", ann_no_timestamp, "Omit timestamps from log events");
  auto* export_cmd = annotate->add_subcommand("export", "Write the dataset with merged evidence");
  add_store_options(export_cmd);
  std::string export_out;
  export_cmd->add_option("--out", export_out, "Merged dataset file")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Agreement and significance statistics");
  stats->require_subcommand(1);
  std::string kappa_a;
  std::string kappa_b;
  auto* kappa = stats->add_subcommand("kappa", "Cohen's kappa between two label files");
  kappa->add_option("--a", kappa_a, "First annotator's labels")->required();
  kappa->add_option("--b", kappa_b, "Second annotator's labels")->required();
  auto* mcnemar = stats->add_subcommand("mcnemar", "McNemar test of accuracy vs strict coherence");
  std::string mc_report;
  std::optional<std::int64_t> mc_b;
  std::optional<std::int64_t> mc_c;
  bool mc_chi2 = false;
  mcnemar->add_option("--report", mc_report, "JSON report from evaluate or sweep");
  mcnemar->add_option("--b", mc_b, "Discordant count b (correct, incoherent)");
  mcnemar->add_option("--c", mc_c, "Discordant count c");
  mcnemar->add_flag("--chi2", mc_chi2, "Also print the continuity-corrected chi-square variant");

  // report
  auto* report = app.add_subcommand("report", "Render saved reports");
  report->require_subcommand(1);
  auto* render = report->add_subcommand("render", "Render one table row per JSON report");
  std::vector<std::string> render_reports;
  std::string render_format = "plain";
  render->add_option("--report", render_reports, "JSON report (repeatable)")->required();
  render->add_option("--format", render_format, "plain, markdown or csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*spans) {
      const auto list = enumerate_spans(span_n);
      for (const auto& s : list) out << to_string(s) << '\n';
      out << "count: " << list.size() << '\n';
      return 0;
    }

    if (*evaluate_cmd) {
      auto& o = eval_opts;
      const ConfidenceRule rule{o.rho, parse_confidence_mode(o.mode)};
      parse_table_format(o.format);
      auto p = prepare(o);
      auto result = evaluate(p.dataset, p.gold, p.predictions, rule);
      auto rep = make_run_report(o.model.empty() ? o.backend : o.model, std::move(result), std::nullopt,
                                 run_config_json(o, p.dataset, false));
      finish_report(rep, o, out);
      return 0;
    }

    if (*sweep_cmd) {
      auto& o = sweep_opts;
      const auto mode = parse_confidence_mode(o.mode);
      const auto grid = parse_grid(o.grid);
      for (double rho : grid) validate(ConfidenceRule{rho, mode});
      parse_table_format(o.format);
      auto p = prepare(o);
      auto sweep = sweep_rho(p.dataset, p.gold, p.predictions, grid, mode);
      auto rep = make_sweep_report(o.model.empty() ? o.backend : o.model, std::move(sweep),
                                   run_config_json(o, p.dataset, true));
      finish_report(rep, o, out);
      return 0;
    }

    if (*cache_cmd) {
      auto& o = cache_opts;
      const Dataset ds = load_for(o);
      const GoldIndex gold = derive_gold_index(ds);
      auto backend = open_backend(backend_config(o), &gold);
      cache_predictions(*backend, ds, o.out_path, {o.workers, o.batch_size});
      std::size_t rows = 0;
      for (const auto& ex : ds.examples) {
        if (is_evaluable(ex)) rows += enumerate_spans(example_length(ex)).size();
      }
      out << "wrote " << rows << " predictions to " << o.out_path << '\n';
      return 0;
    }

    if (*annotate) {
      AnnotationConfig cfg{split_list(ann_annotators), split_list(ann_adjudicators), !ann_no_timestamp};
      AnnotationStore store(load_dataset(ann_dataset), cfg, std::filesystem::path(ann_store));
      if (*export_cmd) {
        store.export_evidence(export_out);
        out << "exported " << store.dataset().examples.size() << " examples to " << export_out << '\n';
        return 0;
      }
      httplib::Server server;
      install_annotation_routes(server, store, ui_dir);
      err << "annotation server listening on http://" << host << ":" << port << '\n';
      if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }

    if (*kappa) {
      const auto a = load_labels(kappa_a);
      const auto b = load_labels(kappa_b);
      std::vector<std::string> la;
      std::vector<std::string> lb;
      for (const auto& [id, label] : a) {
        auto it = b.find(id);
        if (it == b.end()) throw Error("id \"" + id + "\" is labeled in " + kappa_a + " but not in " + kappa_b);
        la.push_back(label);
        lb.push_back(it->second);
      }
      if (a.size() != b.size()) throw Error(kappa_b + " labels ids missing from " + kappa_a);
      const auto r = cohen_kappa(la, lb);
      out << format_kappa(r.kappa) << '\n'
          << "items: " << r.items << '\n'
          << "observed agreement: " << r.observed << '\n'
          << "expected agreement: " << r.expected << '\n';
      return 0;
    }

    if (*mcnemar) {
      std::int64_t b = 0;
      std::int64_t c = 0;
      if (!mc_report.empty()) {
        const json j = load_report(mc_report);
        try {
          b = j.at("paired").at("n10").get<std::int64_t>();
          c = j.at("paired").at("n01").get<std::int64_t>();
        } catch (const json::exception& e) {
          throw Error(mc_report + ": malformed report: " + e.what());
        }
      } else if (mc_b && mc_c) {
        b = *mc_b;
        c = *mc_c;
      } else {
        throw Error("give --report, or both --b and --c");
      }
      const auto exact = mcnemar_exact(b, c);
      out << "b: " << b << '\n' << "c: " << c << '\n' << "exact p: " << format_p(exact.p_value) << '\n';
      if (exact.no_discordant) out << "note: no discordant pairs\n";
      if (mc_chi2) out << "chi2 p: " << format_p(mcnemar_chi2(b, c).p_value) << '\n';
      return 0;
    }

    if (*render) {
      std::vector<ReportRow> rows;
      for (const auto& path : render_reports) rows.push_back(row_from_json(load_report(path)));
      out << render_table(rows, parse_table_format(render_format));
      return 0;
    }
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace coherencekit::cli
