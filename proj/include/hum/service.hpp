#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hum/session.hpp"

namespace hum {

using json = nlohmann::json;

inline json label_json(const Atms& atms, const Label& label) {
  json out = json::array();
  for (const auto& env : label) {
    json names = json::array();
    for (auto a : env) names.push_back(atms.assumption(a).display_name);
    out.push_back(std::move(names));
  }
  return out;
}

/// Structured view of a model for inspection tools.
inline json network_snapshot(const Model& model) {
  const auto& net = model.network();
  const auto& atms = net.atms();
  json snap;

  snap["nodes"] = json::array();
  bool contradictory = net.consistent_mass() <= BeliefNetwork::kZeroMass;
  for (std::size_t i = 0; i < atms.node_count(); ++i) {
    const auto& n = atms.node(NodeId(i));
    json node{{"term", n.term.str()},
              {"label", label_json(atms, n.label)},
              {"is_premise", n.is_premise},
              {"is_contradiction", n.is_contradiction}};
    if (contradictory || n.is_contradiction)
      node["probability"] = nullptr;
    else
      node["probability"] = net.probability_of(NodeId(i));
    snap["nodes"].push_back(std::move(node));
  }

  snap["assumptions"] = json::array();
  for (const auto& a : atms.assumptions()) {
    json entry{{"display_name", a.display_name},
               {"kind", to_string(a.kind)},
               {"retracted", net.is_retracted(a.id)},
               {"node", atms.node(a.node).term.str()}};
    entry["weight"] = a.weight ? json(*a.weight) : json(nullptr);
    entry["choose_set"] = a.owner ? json(a.owner->value) : json(nullptr);
    snap["assumptions"].push_back(std::move(entry));
  }

  snap["choose_sets"] = json::array();
  for (const auto& set : net.choose_sets()) {
    json members = json::array();
    for (const auto& [a, w] : set.members)
      members.push_back({{"assumption", atms.assumption(a).display_name}, {"weight", w}});
    snap["choose_sets"].push_back({{"id", set.id.value}, {"tag", set.tag.str()}, {"members", std::move(members)}});
  }

  snap["nogoods"] = label_json(atms, atms.nogoods());

  snap["justifications"] = json::array();
  for (const auto& j : atms.justifications()) {
    json ants = json::array();
    for (auto a : j.antecedents) ants.push_back(atms.node(a).term.str());
    snap["justifications"].push_back({{"antecedents", std::move(ants)}, {"consequent", atms.node(j.consequent).term.str()}});
  }
  return snap;
}

inline json event_json(const Event& e) {
  json out{{"kind", to_string(e.kind)}, {"text", e.text}};
  if (e.node) out["node"] = *e.node;
  if (e.label) out["label"] = *e.label;
  return out;
}

/// In-memory sessions behind the JSON protocol. Transport-free so it can be
/// tested directly; an HTTP front end maps routes onto these calls.
class SessionService {
 public:
  struct Response {
    int status = 200;
    json body;
  };

  explicit SessionService(SessionOptions options = {}) : options_(options) {}

  std::string create_session() {
    std::lock_guard lock(mu_);
    std::string id;
    do {
      id = random_id();
    } while (sessions_.contains(id));
    sessions_.emplace(id, std::make_shared<Entry>(options_));
    return id;
  }

  bool close_session(const std::string& id) {
    auto entry = take(id);
    if (!entry) return false;
    {
      std::lock_guard lock(entry->mu);
      entry->closed = true;
    }
    entry->cv.notify_all();
    return true;
  }

  Response handle_command(const std::string& id, const std::string& text) {
    auto entry = find(id);
    if (!entry) return not_found(id);
    std::unique_lock lock(entry->mu);
    json lines = json::array();
    json events = json::array();
    std::optional<CommandResult> last;
    try {
      for (const auto& cmd : parse_commands(text)) {
        auto result = entry->session.eval_command(cmd);
        for (const auto& l : result.lines) lines.push_back(l);
        for (const auto& e : result.events) {
          json ev = event_json(e);
          ev["seq"] = entry->events.size();
          entry->events.push_back(ev);
          events.push_back(std::move(ev));
        }
        last = std::move(result);
      }
    } catch (const ParseError& e) {
      return flush(entry, lock, {422, {{"ok", false}, {"error", e.what()}, {"line", e.line()}, {"column", e.column()},
                                       {"output_lines", lines}, {"events", events}}});
    } catch (const Error& e) {
      return flush(entry, lock, {422, {{"ok", false}, {"error", e.what()}, {"output_lines", lines}, {"events", events}}});
    }
    json body{{"ok", true}, {"output_lines", lines}, {"events", events}};
    if (last && last->value) {
      body["value"] = *last->value;
      body["display"] = *last->display;
    }
    return flush(entry, lock, {200, std::move(body)});
  }

  Response get_network(const std::string& id) {
    auto entry = find(id);
    if (!entry) return not_found(id);
    std::lock_guard lock(entry->mu);
    return {200, network_snapshot(entry->session.model())};
  }

  /// Events with sequence number >= `cursor`, waiting up to `wait` for one
  /// to arrive. Returns nullopt once the session is gone.
  std::optional<std::vector<json>> events_since(const std::string& id, std::size_t cursor,
                                                std::chrono::milliseconds wait) {
    auto entry = find_any(id);
    if (!entry) return std::nullopt;
    std::unique_lock lock(entry->mu);
    entry->cv.wait_for(lock, wait, [&] { return entry->closed || entry->events.size() > cursor; });
    if (entry->events.size() <= cursor && entry->closed) return std::nullopt;
    std::vector<json> out;
    for (std::size_t i = cursor; i < entry->events.size(); ++i) out.push_back(entry->events[i]);
    return out;
  }

  bool has_session(const std::string& id) const {
    std::lock_guard lock(mu_);
    return sessions_.contains(id);
  }

 private:
  struct Entry {
    explicit Entry(SessionOptions o) : session(o) {}
    std::mutex mu;
    std::condition_variable cv;
    Session session;
    std::vector<json> events;
    bool closed = false;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  // Closed sessions stay reachable for streams that are still draining.
  std::shared_ptr<Entry> find_any(const std::string& id) const {
    if (auto e = find(id)) return e;
    std::lock_guard lock(mu_);
    auto it = closed_.find(id);
    return it == closed_.end() ? nullptr : it->second.lock();
  }

  std::shared_ptr<Entry> take(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    auto entry = it->second;
    sessions_.erase(it);
    closed_[id] = entry;
    return entry;
  }

  static Response flush(const std::shared_ptr<Entry>& entry, std::unique_lock<std::mutex>& lock, Response r) {
    lock.unlock();
    entry->cv.notify_all();
    return r;
  }

  static Response not_found(const std::string& id) {
    return {404, {{"ok", false}, {"error", "unknown session " + id}}};
  }

  std::string random_id() {
    static constexpr char digits[] = "0123456789abcdef";
    std::uniform_int_distribution<int> pick(0, 15);
    std::string id;
    for (int i = 0; i < 16; ++i) id += digits[pick(rng_)];
    return id;
  }

  SessionOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, std::weak_ptr<Entry>> closed_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace hum
