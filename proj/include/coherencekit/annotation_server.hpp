#pragma once

// JSON HTTP API over an AnnotationStore, plus static files for the UI.

#include <string>

#include <json.hpp>

#include "annotation.hpp"
#include "error.hpp"
#include "log.hpp"

#include <httplib.h>

namespace coherencekit {

namespace detail {

inline void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, ordered_json{{"error", message}});
}

template <typename Handler>
auto guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("malformed request: ") + e.what());
    }
  };
}

inline json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body);
  if (!body.is_object()) throw Error("request body must be a JSON object");
  return body;
}

}  // namespace detail

// Registers the annotation routes on `server`. Static files are served from
// `ui_dir` at / when it is non-empty.
inline void install_annotation_routes(httplib::Server& server, AnnotationStore& store,
                                      const std::string& ui_dir = {}) {
  using detail::guarded;
  using detail::send_json;

  server.Get("/api/tasks/next", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator")) throw Error("missing query parameter \"annotator\"");
    auto view = store.next_task(req.get_param_value("annotator"));
    if (!view) {
      res.status = 204;
      return;
    }
    send_json(res, 200, view_to_json(*view));
  }));

  server.Post("/api/annotations", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const json body = detail::parse_body(req);
    const auto status = store.submit(detail::string_field(body, "annotator"), detail::string_field(body, "example_id"),
                                     payload_from_json(detail::field(body, "payload")));
    send_json(res, 200, ordered_json{{"status", std::string(to_string(status))}});
  }));

  server.Get("/api/disagreements", guarded([&store](const httplib::Request&, httplib::Response& res) {
    ordered_json list = ordered_json::array();
    for (const auto& v : store.disagreements()) list.push_back(view_to_json(v));
    send_json(res, 200, list);
  }));

  server.Post("/api/adjudications", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const json body = detail::parse_body(req);
    const std::string id = detail::string_field(body, "example_id");
    const auto record = store.adjudicate(detail::string_field(body, "adjudicator"), id,
                                         payload_from_json(detail::field(body, "payload")));
    const auto status = store.states().at(id).status;
    ordered_json out = ordered_json::object();
    out["status"] = std::string(to_string(status));
    out["evidence"] = payload_to_json(record.payload);
    send_json(res, 200, out);
  }));

  server.Get("/api/agreement", guarded([&store](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, agreement_to_json(store.agreement()));
  }));

  server.Get("/api/progress", guarded([&store](const httplib::Request&, httplib::Response& res) {
    ordered_json counts = ordered_json::object();
    std::size_t total = 0;
    for (const auto& [status, count] : store.progress()) {
      counts[std::string(to_string(status))] = count;
      total += count;
    }
    counts["total"] = total;
    send_json(res, 200, counts);
  }));

  if (!ui_dir.empty() && !server.set_mount_point("/", ui_dir)) {
    throw Error("UI directory " + ui_dir + " does not exist");
  }
}

}  // namespace coherencekit
