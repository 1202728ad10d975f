#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hum/environment.hpp"
#include "hum/error.hpp"
#include "hum/ids.hpp"
#include "hum/term.hpp"

namespace hum {

enum class AssumptionKind { Distribution, Structure };

inline const char* to_string(AssumptionKind k) { return k == AssumptionKind::Distribution ? "distribution" : "structure"; }

struct Assumption {
  AssumptionId id;
  AssumptionKind kind = AssumptionKind::Distribution;
  std::optional<double> weight;
  std::optional<ChooseSetId> owner;
  std::string display_name;
  /// Order-independent description of where the assumption came from.
  std::string origin;
  NodeId node;
};

struct Justification {
  std::vector<NodeId> antecedents;
  NodeId consequent;
};

struct Node {
  Term term;
  Label label;
  std::vector<std::size_t> consequent_of;
  std::vector<std::size_t> antecedent_of;
  bool is_contradiction = false;
  bool is_premise = false;
  std::optional<AssumptionId> assumption;
};

/// Record of one observable change, for event streams.
struct AtmsChange {
  enum class Kind { LabelChanged, NogoodAdded };
  Kind kind;
  std::optional<NodeId> node;
  Environment nogood;
};

using Antecedent = std::variant<NodeId, AssumptionId>;

/// Assumption-based truth maintenance.
///
/// Every node carries the minimal consistent environments it is derivable
/// from. A justification fires by picking one environment from each
/// antecedent label, taking the union, and adding the result to the
/// consequent label if no existing member subsumes it; new label members are
/// pushed through downstream justifications until nothing changes.
/// Environments reaching a contradiction node become nogoods, and each new
/// nogood is purged from every label in the network.
class Atms {
 public:
  NodeId create_node(Term term) {
    if (!term.is_ground()) throw ModelError("node term must be ground: " + term.str());
    auto key = term.key();
    if (auto it = index_.find(key); it != index_.end())
      throw ModelError("duplicate node " + term.str() + " (existing node " + std::to_string(it->second.value) + ")");
    NodeId id(nodes_.size());
    nodes_.push_back(Node{std::move(term), {}, {}, {}, false, false, std::nullopt});
    index_.emplace(std::move(key), id);
    return id;
  }

  /// Creates an assumption together with its self-supporting node, labelled {{a}}.
  AssumptionId create_assumption(AssumptionKind kind, std::optional<double> weight, std::string display_name,
                                 std::string origin = {}) {
    if (kind == AssumptionKind::Distribution && !weight)
      throw ModelError("distribution assumption " + display_name + " needs a weight");
    if (kind == AssumptionKind::Structure && weight)
      throw ModelError("structure assumption " + display_name + " cannot carry a weight");
    if (weight && !(*weight >= 0)) throw ModelError("assumption " + display_name + " has negative weight");
    AssumptionId id(assumptions_.size());
    NodeId node = create_node(Term::symbol(display_name));
    nodes_[node.index()].assumption = id;
    if (origin.empty()) origin = display_name;
    assumptions_.push_back(Assumption{id, kind, weight, std::nullopt, std::move(display_name), std::move(origin), node});
    update(node, {Environment{id}});
    run();
    return id;
  }

  void assign_owner(AssumptionId a, ChooseSetId owner) {
    auto& info = assumptions_.at(a.index());
    if (info.kind != AssumptionKind::Distribution)
      throw ModelError("structure assumption " + info.display_name + " cannot belong to a distribution");
    if (info.owner) throw ModelError("assumption " + info.display_name + " already belongs to a distribution");
    info.owner = owner;
  }

  void justify(std::span<const Antecedent> antecedents, NodeId consequent) {
    std::vector<NodeId> nodes;
    nodes.reserve(antecedents.size());
    for (const auto& a : antecedents) {
      NodeId n = std::holds_alternative<NodeId>(a) ? std::get<NodeId>(a) : assumption(std::get<AssumptionId>(a)).node;
      check(n);
      if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
    }
    justify_nodes(std::move(nodes), consequent);
  }

  void justify(std::initializer_list<Antecedent> antecedents, NodeId consequent) {
    justify(std::span<const Antecedent>(antecedents.begin(), antecedents.size()), consequent);
  }

  void assert_premise(NodeId n) {
    check(n);
    if (nodes_[n.index()].is_premise) return;
    nodes_[n.index()].is_premise = true;
    justify_nodes({}, n);
  }

  void declare_contradiction(NodeId n) {
    check(n);
    auto& node = nodes_[n.index()];
    if (node.is_contradiction) return;
    node.is_contradiction = true;
    auto envs = node.label.environments();
    node.label.clear();
    if (!envs.empty()) journal_.push_back({AtmsChange::Kind::LabelChanged, n, {}});
    for (const auto& e : envs) install_nogood(e);
  }

  /// Records `env` as inconsistent. The empty environment is rejected here;
  /// it can only arise by derivation (contradictory premises).
  void add_nogood(Environment env) {
    if (env.empty()) throw ModelError("total inconsistency requested: empty nogood");
    if (nogoods_.subsumes(env)) return;
    explicit_nogoods_.push_back(env);
    install_nogood(std::move(env));
  }

  const Label& label_of(NodeId n) const {
    check(n);
    return nodes_[n.index()].label;
  }

  bool holds_in(NodeId n, const Environment& env) const { return label_of(n).subsumes(env); }

  bool is_consistent(const Environment& env) const { return !nogoods_.subsumes(env); }

  std::optional<NodeId> find(const Term& term) const {
    auto it = index_.find(term.key());
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<AssumptionId> find_assumption(std::string_view display_name) const {
    for (const auto& a : assumptions_)
      if (a.display_name == display_name) return a.id;
    return std::nullopt;
  }

  const Node& node(NodeId n) const {
    check(n);
    return nodes_[n.index()];
  }
  const Assumption& assumption(AssumptionId a) const { return assumptions_.at(a.index()); }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::span<const Assumption> assumptions() const noexcept { return assumptions_; }
  std::span<const Justification> justifications() const noexcept { return justifications_; }
  const EnvironmentSet& nogoods() const noexcept { return nogoods_; }
  /// Nogoods added through add_nogood, as opposed to derived from contradictions.
  std::span<const Environment> explicit_nogoods() const noexcept { return explicit_nogoods_; }

  std::vector<AtmsChange> drain_journal() { return std::exchange(journal_, {}); }

  std::string format_environment(const Environment& env) const {
    std::string out = "{";
    bool first = true;
    for (auto a : env) {
      if (!first) out += ", ";
      first = false;
      out += assumption(a).display_name;
    }
    return out + "}";
  }

  std::string format_label(const Label& label) const {
    std::string out = "[";
    for (std::size_t i = 0; i < label.size(); ++i) {
      if (i) out += ", ";
      out += format_environment(label[i]);
    }
    return out + "]";
  }

  /// Debug line: `(Urn H2) [{a_H2}]`.
  std::string dump(NodeId n) const { return node(n).term.str() + " " + format_label(label_of(n)); }

  std::string dump() const {
    std::string out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) out += dump(NodeId(i)) + "\n";
    return out;
  }

 private:
  struct Pending {
    NodeId node;
    std::vector<Environment> added;
  };

  void check(NodeId n) const {
    if (n.index() >= nodes_.size()) throw ModelError("unknown node " + std::to_string(n.value));
  }

  void justify_nodes(std::vector<NodeId> antecedents, NodeId consequent) {
    check(consequent);
    std::size_t j = justifications_.size();
    for (auto a : antecedents) nodes_[a.index()].antecedent_of.push_back(j);
    nodes_[consequent.index()].consequent_of.push_back(j);
    justifications_.push_back(Justification{std::move(antecedents), consequent});
    fire(j, nullptr);
    run();
  }

  /// Computes consequent environments for justification `j`. When `delta` is
  /// set, its node contributes only the newly added environments.
  void fire(std::size_t j, const Pending* delta) {
    const auto& just = justifications_[j];
    std::vector<Environment> envs{Environment{}};
    for (auto a : just.antecedents) {
      const std::vector<Environment>& source =
          delta && delta->node == a ? delta->added : nodes_[a.index()].label.environments();
      EnvironmentSet next;
      for (const auto& e : envs)
        for (const auto& f : source) {
          auto u = e.united(f);
          if (!nogoods_.subsumes(u)) next.add_minimal(u);
        }
      if (next.empty()) return;
      envs = next.environments();
    }
    update(just.consequent, std::move(envs));
  }

  void update(NodeId n, std::vector<Environment> envs) {
    if (nodes_[n.index()].is_contradiction) {
      for (auto& e : envs) install_nogood(std::move(e));
      return;
    }
    auto& label = nodes_[n.index()].label;
    std::vector<Environment> added;
    for (auto& e : envs)
      if (!nogoods_.subsumes(e) && label.add_minimal(e)) added.push_back(std::move(e));
    std::erase_if(added, [&](const Environment& e) { return !label.contains(e); });
    if (added.empty()) return;
    journal_.push_back({AtmsChange::Kind::LabelChanged, n, {}});
    queue_.push_back(Pending{n, std::move(added)});
  }

  void run() {
    while (!queue_.empty()) {
      Pending p = std::move(queue_.front());
      queue_.pop_front();
      const auto& label = nodes_[p.node.index()].label;
      std::erase_if(p.added, [&](const Environment& e) { return !label.contains(e); });
      if (p.added.empty()) continue;
      auto downstream = nodes_[p.node.index()].antecedent_of;
      for (auto j : downstream) fire(j, &p);
    }
  }

  void install_nogood(Environment env) {
    if (nogoods_.subsumes(env)) return;
    nogoods_.add_minimal(env);
    journal_.push_back({AtmsChange::Kind::NogoodAdded, std::nullopt, env});
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].label.remove_supersets_of(env))
        journal_.push_back({AtmsChange::Kind::LabelChanged, NodeId(i), {}});
  }

  std::vector<Node> nodes_;
  std::vector<Assumption> assumptions_;
  std::vector<Justification> justifications_;
  std::unordered_map<std::string, NodeId> index_;
  EnvironmentSet nogoods_;
  std::vector<Environment> explicit_nogoods_;
  std::deque<Pending> queue_;
  std::vector<AtmsChange> journal_;
};

}  // namespace hum
