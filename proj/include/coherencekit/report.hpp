#pragma once

// Summary tables (accuracy, coherence, drop from accuracy, chosen threshold)
// and the machine-readable JSON run report.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "metrics.hpp"
#include "stats.hpp"

namespace coherencekit {

inline constexpr const char* kReportSchema = "coherencekit/1";

struct ReportRow {
  std::string model;
  double accuracy = 0.0;  // percent
  double strict = 0.0;    // percent
  std::optional<double> strict_rho;
  double lenient = 0.0;  // percent, macro
  std::optional<double> lenient_rho;
  std::optional<double> mcnemar_p;
};

enum class TableFormat { plain, markdown, csv };

inline TableFormat parse_table_format(std::string_view s) {
  if (s == "plain") return TableFormat::plain;
  if (s == "markdown") return TableFormat::markdown;
  if (s == "csv") return TableFormat::csv;
  throw Error("unknown table format \"" + std::string(s) + "\"");
}

// Tenths of a percent, rounded half away from zero. Values within 1e-9 of a
// half are treated as exact halves so 28.45 (stored as 28.4499...) rounds up.
inline std::int64_t to_tenths(double percent) {
  const double scaled = percent * 10.0;
  const double floor_v = std::floor(scaled);
  const double frac = scaled - floor_v;
  if (std::fabs(frac - 0.5) < 1e-9) {
    return static_cast<std::int64_t>(scaled >= 0 ? floor_v + 1.0 : floor_v);
  }
  return static_cast<std::int64_t>(std::llround(scaled));
}

inline std::string format_tenths(std::int64_t tenths, bool explicit_sign = false) {
  const bool negative = tenths < 0;
  const std::int64_t mag = negative ? -tenths : tenths;
  std::string s = std::to_string(mag / 10) + "." + std::to_string(mag % 10);
  if (negative) return "-" + s;
  return explicit_sign ? "+" + s : s;
}

inline std::string format_percent(double percent) { return format_tenths(to_tenths(percent)); }

// Difference of the two rendered values, so the printed delta always equals
// the printed metric minus the printed accuracy.
inline std::string format_delta(double metric, double accuracy) {
  return format_tenths(to_tenths(metric) - to_tenths(accuracy), true);
}

// Shortest decimal form: 0.05 -> "0.05", 0.1 -> "0.1".
inline std::string format_rho(double rho) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, snap_grid_value(rho));
  (void)ec;
  return std::string(buf, end);
}

inline std::string format_p(double p) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p, std::chars_format::general, 3);
  (void)ec;
  return std::string(buf, end);
}

inline std::string metric_cell(double metric, double accuracy) {
  return format_percent(metric) + " (" + format_delta(metric, accuracy) + ")";
}

inline std::string render_table(const std::vector<ReportRow>& rows, TableFormat format) {
  if (rows.empty()) throw Error("no rows to render");
  bool with_rho = false;
  for (const auto& r : rows) with_rho = with_rho || r.strict_rho || r.lenient_rho;

  std::ostringstream out;
  if (format == TableFormat::csv) {
    out << "model,accuracy,strict,strict_delta,strict_rho,lenient,lenient_delta,lenient_rho,mcnemar_p\n";
    for (const auto& r : rows) {
      std::string model = r.model;
      if (model.find_first_of(",\"\n") != std::string::npos) {
        std::string quoted = "\"";
        for (char ch : model) {
          if (ch == '"') quoted += '"';
          quoted += ch;
        }
        model = quoted + "\"";
      }
      out << model << ',' << format_percent(r.accuracy) << ',' << format_percent(r.strict) << ','
          << format_delta(r.strict, r.accuracy) << ',' << (r.strict_rho ? format_rho(*r.strict_rho) : "") << ','
          << format_percent(r.lenient) << ',' << format_delta(r.lenient, r.accuracy) << ','
          << (r.lenient_rho ? format_rho(*r.lenient_rho) : "") << ','
          << (r.mcnemar_p ? format_p(*r.mcnemar_p) : "") << '\n';
    }
    return out.str();
  }

  std::vector<std::string> header{"Model", "Accuracy (%)", "Strict Coherence (Δ; %)"};
  if (with_rho) header.push_back("ρ");
  header.push_back("Lenient Coherence (Δ; %)");
  if (with_rho) header.push_back("ρ");
  header.push_back("McNemar p");

  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::vector<std::string> line{r.model, format_percent(r.accuracy), metric_cell(r.strict, r.accuracy)};
    if (with_rho) line.push_back(r.strict_rho ? format_rho(*r.strict_rho) : "--");
    line.push_back(metric_cell(r.lenient, r.accuracy));
    if (with_rho) line.push_back(r.lenient_rho ? format_rho(*r.lenient_rho) : "--");
    line.push_back(r.mcnemar_p ? format_p(*r.mcnemar_p) : "--");
    cells.push_back(std::move(line));
  }

  // Display width in code points; the header carries Δ and ρ.
  auto width_of = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) {
      if ((ch & 0xC0) != 0x80) ++w;
    }
    return w;
  };
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = width_of(header[c]);
    for (const auto& line : cells) widths[c] = std::max(widths[c], width_of(line[c]));
  }
  auto pad = [&](const std::string& s, std::size_t c) { return s + std::string(widths[c] - width_of(s), ' '); };

  if (format == TableFormat::markdown) {
    auto emit = [&](const std::vector<std::string>& line) {
      out << '|';
      for (std::size_t c = 0; c < line.size(); ++c) out << ' ' << pad(line[c], c) << " |";
      out << '\n';
    };
    emit(header);
    out << '|';
    for (std::size_t c = 0; c < header.size(); ++c) out << std::string(widths[c] + 2, '-') << '|';
    out << '\n';
    for (const auto& line : cells) emit(line);
    return out.str();
  }

  auto emit = [&](const std::vector<std::string>& line) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) text += "  ";
      text += pad(line[c], c);
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out << text << '\n';
  };
  emit(header);
  for (const auto& line : cells) emit(line);
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON run report

struct RunReport {
  std::string model;
  CoherenceResult result;            // for sweeps: the best-strict grid point
  std::optional<SweepResult> sweep;  // choice-task sweeps only
  PairedOutcomes paired;
  McNemarResult mcnemar;
  ordered_json config = ordered_json::object();
  std::optional<std::string> timestamp;
};

inline RunReport make_run_report(std::string model, CoherenceResult result, std::optional<SweepResult> sweep,
                                 ordered_json config = ordered_json::object()) {
  RunReport r;
  r.model = std::move(model);
  r.result = std::move(result);
  r.sweep = std::move(sweep);
  r.paired = pair_outcomes(r.result);
  r.mcnemar = mcnemar_exact(r.paired);
  r.config = std::move(config);
  return r;
}

inline RunReport make_sweep_report(std::string model, SweepResult sweep, ordered_json config = ordered_json::object()) {
  CoherenceResult best = sweep.at_best_strict();
  return make_run_report(std::move(model), std::move(best), std::move(sweep), std::move(config));
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline ordered_json aggregates_json(const CoherenceResult& r) {
  ordered_json j = ordered_json::object();
  j["accuracy"] = r.accuracy;
  j["strict"] = r.strict_coherence;
  j["lenient_macro"] = r.lenient_macro;
  j["lenient_micro"] = r.lenient_micro;
  return j;
}

inline ordered_json report_to_json(const RunReport& rep) {
  ordered_json j = ordered_json::object();
  j["schema"] = kReportSchema;
  j["model"] = rep.model;
  j["task"] = std::string(to_string(rep.result.task));
  j["config"] = rep.config;
  const ordered_json aggregates = aggregates_json(rep.result);
  for (const auto& [k, v] : aggregates.items()) j[k] = v;
  j["rho"] = rep.result.rho_used ? ordered_json(*rep.result.rho_used) : ordered_json(nullptr);
  j["mode"] = std::string(to_string(rep.result.mode));
  if (rep.sweep) {
    const auto& s = *rep.sweep;
    ordered_json best = ordered_json::object();
    best["strict_rho"] = s.best_strict_rho;
    best["strict"] = s.at_best_strict().strict_coherence;
    best["lenient_rho"] = s.best_lenient_rho;
    best["lenient_macro"] = s.at_best_lenient().lenient_macro;
    best["lenient_micro"] = s.at_best_lenient().lenient_micro;
    j["best"] = best;
    ordered_json curve = ordered_json::array();
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      ordered_json point = ordered_json::object();
      point["rho"] = s.grid[i];
      const ordered_json at = aggregates_json(s.results[i]);
      for (const auto& [k, v] : at.items()) point[k] = v;
      curve.push_back(point);
    }
    j["sweep"] = curve;
  } else {
    j["best"] = nullptr;
    j["sweep"] = nullptr;
  }
  j["paired"] = {{"n00", rep.paired.n00}, {"n01", rep.paired.n01}, {"n10", rep.paired.n10}, {"n11", rep.paired.n11}};
  ordered_json mc = ordered_json::object();
  mc["method"] = "exact";
  mc["b"] = rep.mcnemar.b;
  mc["c"] = rep.mcnemar.c;
  mc["p"] = rep.mcnemar.p_value;
  mc["no_discordant"] = rep.mcnemar.no_discordant;
  j["mcnemar"] = mc;
  ordered_json verdicts = ordered_json::array();
  for (const auto& v : rep.result.verdicts) {
    ordered_json row = ordered_json::object();
    row["id"] = v.example_id;
    row["end_correct"] = v.end_correct;
    row["span_correct"] = v.span_correct_count;
    row["span_total"] = v.span_total;
    row["coherent"] = v.coherent;
    verdicts.push_back(row);
  }
  j["verdicts"] = verdicts;
  if (rep.timestamp) j["timestamp"] = *rep.timestamp;
  return j;
}

inline void emit_json(const RunReport& rep, const std::string& out_path) {
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write report " + out_path);
  out << report_to_json(rep).dump(2) << '\n';
  out.close();
  if (!out) throw Error("I/O failure writing report " + out_path);
}

inline ReportRow row_from_report(const RunReport& rep) {
  ReportRow row;
  row.model = rep.model;
  row.accuracy = 100.0 * rep.result.accuracy;
  row.strict = 100.0 * rep.result.strict_coherence;
  row.lenient = 100.0 * rep.result.lenient_macro;
  if (rep.sweep) {
    row.strict_rho = rep.sweep->best_strict_rho;
    row.lenient_rho = rep.sweep->best_lenient_rho;
    row.lenient = 100.0 * rep.sweep->at_best_lenient().lenient_macro;
  } else if (rep.result.rho_used) {
    row.strict_rho = row.lenient_rho = *rep.result.rho_used;
  }
  row.mcnemar_p = rep.mcnemar.p_value;
  return row;
}

// Inverse of report_to_json for the fields a table needs.
inline ReportRow row_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != kReportSchema) {
    throw Error(std::string("not a ") + kReportSchema + " report");
  }
  ReportRow row;
  try {
    row.model = j.at("model").get<std::string>();
    row.accuracy = 100.0 * j.at("accuracy").get<double>();
    row.strict = 100.0 * j.at("strict").get<double>();
    row.lenient = 100.0 * j.at("lenient_macro").get<double>();
    const auto& best = j.at("best");
    if (!best.is_null()) {
      row.strict_rho = best.at("strict_rho").get<double>();
      row.lenient_rho = best.at("lenient_rho").get<double>();
      row.lenient = 100.0 * best.at("lenient_macro").get<double>();
    } else if (!j.at("rho").is_null()) {
      row.strict_rho = row.lenient_rho = j.at("rho").get<double>();
    }
    row.mcnemar_p = j.at("mcnemar").at("p").get<double>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return row;
}

inline json load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open report " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path + ": malformed JSON: " + e.what());
  }
}

}  // namespace coherencekit
