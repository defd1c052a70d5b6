#pragma once

// Runs a backend over every (example, sub-span) of a dataset.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "backend.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "log.hpp"

namespace coherencekit {

struct EngineOptions {
  int workers = 1;
  int batch_size = 32;
};

// Requests in canonical order: dataset order, then span order.
inline std::vector<PredictionRequest> build_requests(const Dataset& ds) {
  std::vector<PredictionRequest> requests;
  for (const auto& ex : ds.examples) {
    if (!is_evaluable(ex)) continue;
    for (const auto& span : enumerate_spans(example_length(ex))) {
      requests.push_back({{example_id(ex), span}, realize_span(ex, span)});
    }
  }
  return requests;
}

// Batches are dispatched to min(workers, backend.max_in_flight()) threads.
// Results are keyed, so the table does not depend on scheduling.
inline PredictionTable collect_predictions(const Dataset& ds, Backend& backend,
                                           const EngineOptions& opts = {}) {
  if (opts.batch_size < 1) throw Error("batch size must be >= 1");
  if (opts.workers < 1) throw Error("worker count must be >= 1");
  const auto requests = build_requests(ds);
  PredictionTable table;
  if (requests.empty()) return table;

  const std::size_t batch = static_cast<std::size_t>(opts.batch_size);
  const std::size_t batches = (requests.size() + batch - 1) / batch;
  int workers = opts.workers;
  if (backend.max_in_flight() > 0) workers = std::min(workers, backend.max_in_flight());
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), batches));

  std::vector<std::optional<Distribution>> results(requests.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::size_t error_batch = batches;
  std::exception_ptr error;

  auto work = [&] {
    while (!failed.load()) {
      const std::size_t b = next.fetch_add(1);
      if (b >= batches) return;
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(requests.size(), lo + batch);
      try {
        auto dists = backend.predict_batch(std::span(requests).subspan(lo, hi - lo));
        for (std::size_t i = lo; i < hi; ++i) results[i] = std::move(dists[i - lo]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (b < error_batch) {
          error_batch = b;
          error = std::current_exception();
        }
        failed.store(true);
        return;
      }
    }
  };

  log::info("running ", requests.size(), " sub-span instances in ", batches, " batches on ", workers,
            " worker(s)");
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t i = 0; i < requests.size(); ++i) table.emplace(requests[i].key, std::move(*results[i]));
  return table;
}

// Writes one prediction row per (example, span) in canonical order. The file
// is written beside `out_path` and renamed into place, so a failing backend
// leaves no partial output.
inline void cache_predictions(Backend& backend, const Dataset& ds, const std::string& out_path,
                              const EngineOptions& opts = {}) {
  const std::string tmp = out_path + ".partial";
  try {
    const auto table = collect_predictions(ds, backend, opts);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    for (const auto& req : build_requests(ds)) {
      out << prediction_row(req.key, table.at(req.key)).dump() << '\n';
    }
    out.close();
    if (!out) throw Error("I/O failure writing " + tmp);
    std::filesystem::rename(tmp, out_path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

}  // namespace coherencekit
