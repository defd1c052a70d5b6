#pragma once

// Cohen's kappa for two-annotator agreement and McNemar's test for the
// paired (accuracy, strict coherence) outcomes of one classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "metrics.hpp"

namespace coherencekit {

struct AgreementReport {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  std::size_t items = 0;
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;  // (a, b) -> count
};

inline AgreementReport cohen_kappa(const std::vector<std::string>& labels_a,
                                   const std::vector<std::string>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw Error("annotator label lists differ in length (" + std::to_string(labels_a.size()) + " vs " +
                std::to_string(labels_b.size()) + ")");
  }
  if (labels_a.empty()) throw Error("cannot compute kappa over zero items");
  AgreementReport report;
  report.items = labels_a.size();
  std::map<std::string, std::size_t> marginal_a;
  std::map<std::string, std::size_t> marginal_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++report.confusion[{labels_a[i], labels_b[i]}];
    ++marginal_a[labels_a[i]];
    ++marginal_b[labels_b[i]];
    if (labels_a[i] == labels_b[i]) ++agree;
  }
  const double n = static_cast<double>(report.items);
  report.observed = static_cast<double>(agree) / n;
  // Summing count products as integers keeps p_e exact and symmetric.
  std::uint64_t chance = 0;
  for (const auto& [label, count_a] : marginal_a) {
    auto it = marginal_b.find(label);
    if (it != marginal_b.end()) chance += static_cast<std::uint64_t>(count_a) * it->second;
  }
  report.expected = static_cast<double>(chance) / (n * n);
  if (report.expected >= 1.0) {
    report.kappa = 1.0;  // both annotators used one shared label throughout
  } else {
    report.kappa = (report.observed - report.expected) / (1.0 - report.expected);
  }
  return report;
}

// 2x2 table of (end_correct, coherent) per example. n10 counts examples that
// are correct but incoherent; n01 is structurally zero for strict coherence.
struct PairedOutcomes {
  std::int64_t n00 = 0;
  std::int64_t n01 = 0;
  std::int64_t n10 = 0;
  std::int64_t n11 = 0;

  std::int64_t b() const { return n10; }
  std::int64_t c() const { return n01; }
  bool operator==(const PairedOutcomes&) const = default;
};

inline PairedOutcomes pair_outcomes(const CoherenceResult& result) {
  PairedOutcomes t;
  for (const auto& v : result.verdicts) {
    if (v.end_correct) {
      (v.coherent ? t.n11 : t.n10) += 1;
    } else {
      (v.coherent ? t.n01 : t.n00) += 1;
    }
  }
  return t;
}

struct McNemarResult {
  std::int64_t b = 0;
  std::int64_t c = 0;
  double p_value = 1.0;
  bool no_discordant = false;
};

// P(X <= k) for X ~ Binomial(n, 1/2).
inline double binomial_half_cdf(std::int64_t k, std::int64_t n) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (n <= 1000) {
    double pmf = std::ldexp(1.0, static_cast<int>(-n));
    double sum = pmf;
    for (std::int64_t i = 0; i < k; ++i) {
      pmf *= static_cast<double>(n - i) / static_cast<double>(i + 1);
      sum += pmf;
    }
    return sum;
  }
  // Log-space for large n, accumulated from the largest term down.
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  auto log_pmf = [&](std::int64_t i) {
    return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
           std::lgamma(static_cast<double>(n - i) + 1) + log_half_n;
  };
  const double top = log_pmf(k);
  double sum = 0.0;
  for (std::int64_t i = k; i >= 0; --i) {
    const double term = std::exp(log_pmf(i) - top);
    sum += term;
    if (term < 1e-18) break;
  }
  return std::exp(top) * sum;
}

// Exact two-sided test: p = min(1, 2 * P(X <= min(b, c))), X ~ Bin(b + c, 1/2).
inline McNemarResult mcnemar_exact(std::int64_t b, std::int64_t c) {
  if (b < 0 || c < 0) throw Error("discordant counts must be non-negative");
  McNemarResult r{b, c};
  if (b + c == 0) {
    r.no_discordant = true;
    return r;
  }
  r.p_value = std::min(1.0, 2.0 * binomial_half_cdf(std::min(b, c), b + c));
  return r;
}

inline McNemarResult mcnemar_exact(const PairedOutcomes& t) { return mcnemar_exact(t.b(), t.c()); }

// Asymptotic chi-square variant with continuity correction, 1 d.o.f.
inline McNemarResult mcnemar_chi2(std::int64_t b, std::int64_t c) {
  if (b < 0 || c < 0) throw Error("discordant counts must be non-negative");
  McNemarResult r{b, c};
  if (b + c == 0) {
    r.no_discordant = true;
    return r;
  }
  const double diff = std::max(0.0, std::fabs(static_cast<double>(b - c)) - 1.0);
  const double stat = diff * diff / static_cast<double>(b + c);
  r.p_value = std::min(1.0, std::erfc(std::sqrt(stat / 2.0)));
  return r;
}

}  // namespace coherencekit
