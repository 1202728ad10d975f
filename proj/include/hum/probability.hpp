#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hum/atms.hpp"

namespace hum {

/// Mutually exclusive, exhaustive weighted assumptions: one distribution.
struct ChooseSet {
  ChooseSetId id;
  std::vector<std::pair<AssumptionId, double>> members;
  Term tag;
  double total = 0;

  double normalized(std::size_t i) const { return members[i].second / total; }
};

/// An ATMS whose distribution assumptions are grouped into choose sets and
/// whose structure assumptions can be retracted.
///
/// A world picks one member from every choose set and includes every live
/// structure assumption. Probabilities are ratios of world weight mass, with
/// worlds that contain a nogood thrown out.
class BeliefNetwork {
 public:
  Atms& atms() noexcept { return atms_; }
  const Atms& atms() const noexcept { return atms_; }

  ChooseSetId register_choose(std::vector<std::pair<AssumptionId, double>> members, Term tag) {
    if (members.empty()) throw ModelError("distribution " + tag.str() + " has no members");
    double total = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& info = atms_.assumption(members[i].first);
      if (info.kind != AssumptionKind::Distribution)
        throw ModelError("structure assumption " + info.display_name + " cannot belong to a distribution");
      if (info.owner) throw ModelError("assumption " + info.display_name + " already belongs to a distribution");
      if (!(members[i].second >= 0)) throw ModelError("negative weight in distribution " + tag.str());
      for (std::size_t j = 0; j < i; ++j)
        if (members[j].first == members[i].first)
          throw ModelError("assumption " + info.display_name + " listed twice in " + tag.str());
      total += members[i].second;
    }
    if (!(total > 0)) throw ModelError("distribution " + tag.str() + " has zero total weight");

    ChooseSetId id(sets_.size());
    for (const auto& [a, w] : members) atms_.assign_owner(a, id);
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        atms_.add_nogood(Environment{members[i].first, members[j].first});
    sets_.push_back(ChooseSet{id, std::move(members), std::move(tag), total});
    return id;
  }

  const ChooseSet& choose_set(ChooseSetId id) const { return sets_.at(id.index()); }
  const std::vector<ChooseSet>& choose_sets() const noexcept { return sets_; }

  /// Withdraws a structure assumption from every world.
  void retract_assumption(AssumptionId a) {
    const auto& info = atms_.assumption(a);
    if (info.kind != AssumptionKind::Structure)
      throw ModelError("cannot retract distribution assumption " + info.display_name +
                       "; condition on evidence instead");
    if (!retracted_.insert(a).second) return;
    atms_.add_nogood(Environment{a});
  }

  bool is_retracted(AssumptionId a) const { return retracted_.contains(a); }

  /// Weight of the worlds in which some environment of `label` holds and no
  /// nogood does. World weights are normalized, so this is a probability mass.
  double evaluate_label_weight(const Label& label) const { return Evaluator(*this).weight(label.environments()); }

  /// Mass of all consistent worlds.
  double consistent_mass() const { return evaluate_label_weight(Label{Environment{}}); }

  double probability_of(NodeId n) const {
    Evaluator eval(*this);
    double total = eval.weight({Environment{}});
    if (total <= kZeroMass) throw ContradictionError(contradiction_message());
    double mass = eval.weight(atms_.label_of(n).environments());
    return std::clamp(mass / total, 0.0, 1.0);
  }

  static constexpr double kZeroMass = 1e-12;

 private:
  std::string contradiction_message() const {
    std::string msg = "contradictory evidence: no consistent world remains";
    if (!atms_.nogoods().empty()) msg += "; conflicting nogood " + atms_.format_environment(atms_.nogoods()[0]);
    return msg;
  }

  /// Exact evaluation of (F and not G) over choose-set worlds, where F is a
  /// label and G the nogood database, both monotone DNFs over assumptions.
  ///
  /// Live structure assumptions are true in every world and are dropped from
  /// environments; retracted ones are false and kill their environments.
  /// What remains is expanded one choose set at a time: for each member m,
  /// environments naming a sibling of m are false and m itself is removed.
  /// Subproblems are memoized on their canonical form, so the cost is bounded
  /// by the number of distinct residual pairs, at worst exponential in the
  /// number of choose sets the formulas mention.
  class Evaluator {
   public:
    explicit Evaluator(const BeliefNetwork& net) : net_(net) { nogoods_ = restrict(net.atms_.nogoods().environments()); }

    double weight(const std::vector<Environment>& label) { return solve(restrict(label), nogoods_); }

   private:
    using Dnf = std::vector<Environment>;

    Dnf restrict(const std::vector<Environment>& envs) const {
      EnvironmentSet out;
      for (const auto& env : envs) {
        std::vector<AssumptionId> kept;
        bool alive = true;
        for (auto a : env) {
          const auto& info = net_.atms_.assumption(a);
          if (info.kind == AssumptionKind::Structure) {
            if (net_.is_retracted(a)) alive = false;
          } else if (!info.owner) {
            alive = false;
          } else {
            kept.push_back(a);
          }
          if (!alive) break;
        }
        if (alive) out.add_minimal(Environment(std::move(kept)));
      }
      return out.environments();
    }

    static bool has_empty(const Dnf& d) { return !d.empty() && d.front().empty(); }

    Dnf condition(const Dnf& d, const ChooseSet& set, AssumptionId chosen) const {
      EnvironmentSet out;
      for (const auto& env : d) {
        bool alive = true;
        for (auto a : env)
          if (a != chosen && net_.atms_.assumption(a).owner == set.id) {
            alive = false;
            break;
          }
        if (alive) out.add_minimal(env.without(chosen));
      }
      return out.environments();
    }

    double solve(const Dnf& f, const Dnf& g) {
      if (has_empty(g) || f.empty()) return 0.0;
      if (has_empty(f) && g.empty()) return 1.0;

      auto key = std::make_pair(f, g);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;

      const ChooseSet& set = net_.sets_[branch_set(f, g).index()];
      double sum = 0;
      for (std::size_t i = 0; i < set.members.size(); ++i) {
        double w = set.normalized(i);
        if (w == 0) continue;
        auto m = set.members[i].first;
        sum += w * solve(condition(f, set, m), condition(g, set, m));
      }
      memo_.emplace(std::move(key), sum);
      return sum;
    }

    /// The choose set mentioned most often across both formulas.
    ChooseSetId branch_set(const Dnf& f, const Dnf& g) const {
      std::map<ChooseSetId, std::size_t> counts;
      for (const auto* d : {&f, &g})
        for (const auto& env : *d)
          for (auto a : env) ++counts[*net_.atms_.assumption(a).owner];
      auto best = std::max_element(counts.begin(), counts.end(),
                                   [](const auto& x, const auto& y) { return x.second < y.second; });
      return best->first;
    }

    const BeliefNetwork& net_;
    Dnf nogoods_;
    std::map<std::pair<Dnf, Dnf>, double> memo_;
  };

  Atms atms_;
  std::vector<ChooseSet> sets_;
  std::set<AssumptionId> retracted_;
};

}  // namespace hum
