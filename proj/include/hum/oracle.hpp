#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hum/probability.hpp"

namespace hum::oracle {

// Brute-force reference semantics. Works from the raw justification list and
// never reads labels or the derived nogood set, so it can check them.

/// Everything the oracle needs, copied out of a network.
struct WorldEnumeration {
  std::size_t node_count = 0;
  std::size_t assumption_count = 0;
  std::vector<Justification> justifications;
  /// assumption index -> node that stands for it
  std::vector<NodeId> assumption_nodes;
  std::vector<bool> contradiction;
  /// Normalized members of every choose set.
  std::vector<std::vector<std::pair<AssumptionId, double>>> choose_sets;
  /// Structure assumptions that are true in every world.
  std::vector<AssumptionId> active_structure;
  std::vector<Environment> explicit_nogoods;
};

inline constexpr std::uint64_t kMaxWorlds = 1'000'000;

inline WorldEnumeration snapshot(const BeliefNetwork& net) {
  const Atms& atms = net.atms();
  WorldEnumeration s;
  s.node_count = atms.node_count();
  s.assumption_count = atms.assumptions().size();
  s.justifications.assign(atms.justifications().begin(), atms.justifications().end());
  for (const auto& a : atms.assumptions()) {
    s.assumption_nodes.push_back(a.node);
    if (a.kind == AssumptionKind::Structure && !net.is_retracted(a.id)) s.active_structure.push_back(a.id);
  }
  for (std::size_t i = 0; i < s.node_count; ++i) s.contradiction.push_back(atms.node(NodeId(i)).is_contradiction);
  for (const auto& set : net.choose_sets()) {
    std::vector<std::pair<AssumptionId, double>> members;
    for (std::size_t i = 0; i < set.members.size(); ++i) members.emplace_back(set.members[i].first, set.normalized(i));
    s.choose_sets.push_back(std::move(members));
  }
  s.explicit_nogoods.assign(atms.explicit_nogoods().begin(), atms.explicit_nogoods().end());
  return s;
}

inline std::uint64_t world_count(const WorldEnumeration& s) {
  std::uint64_t n = 1;
  for (const auto& set : s.choose_sets) {
    n *= set.size();
    if (n > kMaxWorlds) throw ModelError("world enumeration exceeds " + std::to_string(kMaxWorlds) + " worlds");
  }
  return n;
}

/// Least fixpoint of the justifications read as Horn clauses.
inline std::vector<bool> horn_closure(const WorldEnumeration& s, const std::vector<bool>& true_assumptions) {
  std::vector<bool> holds(s.node_count, false);
  for (std::size_t a = 0; a < s.assumption_count; ++a)
    if (true_assumptions[a]) holds[s.assumption_nodes[a].index()] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& j : s.justifications) {
      if (holds[j.consequent.index()]) continue;
      bool fire = true;
      for (auto a : j.antecedents)
        if (!holds[a.index()]) {
          fire = false;
          break;
        }
      if (fire) {
        holds[j.consequent.index()] = true;
        changed = true;
      }
    }
  }
  return holds;
}

/// A world is consistent iff no explicit nogood is contained in it and its
/// closure reaches no contradiction node.
inline bool consistent(const WorldEnumeration& s, const std::vector<bool>& true_assumptions,
                       const std::vector<bool>& closure) {
  for (const auto& ng : s.explicit_nogoods) {
    bool inside = true;
    for (auto a : ng)
      if (!true_assumptions[a.index()]) {
        inside = false;
        break;
      }
    if (inside) return false;
  }
  for (std::size_t i = 0; i < s.node_count; ++i)
    if (s.contradiction[i] && closure[i]) return false;
  return true;
}

struct World {
  std::vector<AssumptionId> selection;
  double weight = 1;
  bool consistent = true;
  std::vector<bool> closure;
};

/// Visits every world in odometer order (last choose set varies fastest).
inline void for_each_world(const WorldEnumeration& s, const std::function<void(const World&)>& visit) {
  world_count(s);
  std::vector<std::size_t> digits(s.choose_sets.size(), 0);
  for (;;) {
    World w;
    std::vector<bool> truth(s.assumption_count, false);
    for (auto a : s.active_structure) truth[a.index()] = true;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      const auto& [a, weight] = s.choose_sets[i][digits[i]];
      w.selection.push_back(a);
      w.weight *= weight;
      truth[a.index()] = true;
    }
    w.closure = horn_closure(s, truth);
    w.consistent = consistent(s, truth, w.closure);
    visit(w);

    std::size_t k = digits.size();
    while (k > 0) {
      --k;
      if (++digits[k] < s.choose_sets[k].size()) break;
      digits[k] = 0;
      if (k == 0) return;
    }
    if (digits.empty()) return;
  }
}

inline std::vector<World> enumerate_worlds(const WorldEnumeration& s) {
  std::vector<World> out;
  for_each_world(s, [&](const World& w) { out.push_back(w); });
  return out;
}

/// Posterior of every node; nullopt when no consistent world has weight.
inline std::optional<std::vector<double>> oracle_probabilities(const WorldEnumeration& s) {
  double total = 0;
  std::vector<double> mass(s.node_count, 0.0);
  for_each_world(s, [&](const World& w) {
    if (!w.consistent) return;
    total += w.weight;
    for (std::size_t i = 0; i < s.node_count; ++i)
      if (w.closure[i]) mass[i] += w.weight;
  });
  if (total <= BeliefNetwork::kZeroMass) return std::nullopt;
  for (auto& m : mass) m /= total;
  return mass;
}

inline double oracle_probability(NodeId n, const WorldEnumeration& s) {
  auto all = oracle_probabilities(s);
  if (!all) throw ContradictionError("contradictory evidence: every world is inconsistent");
  return all->at(n.index());
}

}  // namespace hum::oracle
