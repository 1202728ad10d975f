#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <httplib.h>

#include "hum/service.hpp"

namespace hum {

/// HTTP routes for SessionService. See docs/protocol.md.
///
///   POST   /sessions                  -> 201 {"session": id}
///   DELETE /sessions/{id}             -> 200 / 404
///   POST   /sessions/{id}/commands    -> handle_command; body {"text": ...} or raw text
///   GET    /sessions/{id}/network     -> network snapshot
///   GET    /sessions/{id}/events      -> text/event-stream, replayed from ?from=N
inline void install_routes(httplib::Server& server, const std::shared_ptr<SessionService>& service) {
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.dump(), "application/json");
  };

  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Post("/sessions", [service, send](const httplib::Request&, httplib::Response& res) {
    send(res, 201, {{"session", service->create_session()}});
  });

  server.Delete(R"(/sessions/([0-9a-f]+))", [service, send](const httplib::Request& req, httplib::Response& res) {
    std::string id = req.matches[1];
    if (service->close_session(id))
      send(res, 200, {{"ok", true}});
    else
      send(res, 404, {{"ok", false}, {"error", "unknown session " + id}});
  });

  server.Post(R"(/sessions/([0-9a-f]+)/commands)", [service, send](const httplib::Request& req, httplib::Response& res) {
    std::string text = req.body;
    if (req.get_header_value("Content-Type").starts_with("application/json")) {
      auto body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("text") || !body["text"].is_string()) {
        send(res, 400, {{"ok", false}, {"error", "expected a JSON object with a string field 'text'"}});
        return;
      }
      text = body["text"].get<std::string>();
    }
    auto r = service->handle_command(req.matches[1], text);
    send(res, r.status, r.body);
  });

  server.Get(R"(/sessions/([0-9a-f]+)/network)", [service, send](const httplib::Request& req, httplib::Response& res) {
    auto r = service->get_network(req.matches[1]);
    send(res, r.status, r.body);
  });

  server.Get(R"(/sessions/([0-9a-f]+)/events)", [service, send](const httplib::Request& req, httplib::Response& res) {
    std::string id = req.matches[1];
    if (!service->has_session(id)) {
      send(res, 404, {{"ok", false}, {"error", "unknown session " + id}});
      return;
    }
    std::size_t cursor = 0;
    if (req.has_param("from")) cursor = std::stoul(req.get_param_value("from"));
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [service, id, cursor](std::size_t, httplib::DataSink& sink) mutable {
          if (!sink.is_writable()) return false;
          auto batch = service->events_since(id, cursor, std::chrono::milliseconds(250));
          if (!batch) {
            sink.done();
            return true;
          }
          for (const auto& ev : *batch) {
            std::string frame = "id: " + std::to_string(cursor) + "\nevent: " + ev["kind"].get<std::string>() +
                                "\ndata: " + ev.dump() + "\n\n";
            if (!sink.write(frame.data(), frame.size())) return false;
            ++cursor;
          }
          return true;
        });
  });
}

}  // namespace hum
