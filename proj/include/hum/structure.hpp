#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hum/probability.hpp"

namespace hum {

/// Announcements emitted while the model structure changes.
struct StructureEvent {
  enum class Kind { Assuming, Monitoring, Retracting };
  Kind kind;
  Term statement;

  std::string line() const {
    static constexpr const char* verbs[] = {"Assuming", "Monitoring", "Retracting"};
    return std::string("** ") + verbs[static_cast<int>(kind)] + " " + statement.str() + " ***";
  }
};

/// The link from a report's evidence distribution to the report's value nodes.
struct EvidenceAttachment {
  Term report;
  ChooseSetId evidence;
  /// Evidence assumptions and value nodes, both aligned with the report's values.
  std::vector<AssumptionId> value_evidence;
  std::vector<NodeId> value_nodes;
  /// Structure assumptions every link justification is conditioned on.
  std::vector<AssumptionId> conditions;
  /// Report whose evidence this one reuses, if the two were decided to coincide.
  std::optional<Term> shared_with;
};

/// A defeasible modeling decision, recorded as a retractable assumption.
struct StructureAssumption {
  AssumptionId assumption;
  Term statement;
  bool retracted = false;
};

/// One-shot trigger: when `trigger` is asserted, the two reports are
/// restructured to share the existing report's evidence.
struct Monitor {
  Term trigger;
  std::size_t structure = 0;
  Term existing_report;
  Term incoming_report;
  bool fired = false;
};

enum class EvidenceRelation { Independent, Shared };

/// Normalized prior over where a report's information came from.
struct SourceDistribution {
  std::vector<std::string> values;
  std::vector<double> weights;
};

/// Probability that two reports came from the same named agency. The value
/// `ind` stands for an independent source, and two of those never coincide.
inline double shared_source_probability(const SourceDistribution& a, const SourceDistribution& b) {
  double p = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (detail::iequals(a.values[i], "ind")) continue;
    for (std::size_t j = 0; j < b.values.size(); ++j)
      if (detail::iequals(a.values[i], b.values[j])) p += a.weights[i] * b.weights[j];
  }
  return p;
}

inline constexpr double kSharedThreshold = 0.5;

inline Term evidence_statement(std::string_view relation, const Term& first, const Term& second) {
  return Term::list({Term::symbol(std::string(relation)), Term::symbol("evidence-for"), first, second});
}

/// Bookkeeping for evidence attachments, independence decisions and monitors.
class StructureManager {
 public:
  const EvidenceAttachment* attachment(const Term& report) const {
    auto it = attachments_.find(report.key());
    return it == attachments_.end() ? nullptr : &it->second;
  }

  const std::vector<StructureAssumption>& assumptions() const noexcept { return assumptions_; }
  const std::vector<Monitor>& monitors() const noexcept { return monitors_; }

  std::vector<StructureEvent> drain_events() { return std::exchange(events_, {}); }

  /// True when the decision for this pair is to share evidence outright.
  bool would_share(const Term& existing, const Term& incoming, const SourceDistribution& existing_source,
                   const SourceDistribution& incoming_source) const {
    auto pair = pair_key(existing, incoming);
    if (known_same_.contains(pair)) return true;
    if (known_independent_.contains(pair)) return false;
    return shared_source_probability(existing_source, incoming_source) >= kSharedThreshold;
  }

  /// Decides whether `incoming` reports the same evidence as `existing`.
  /// An independence decision is recorded as a fresh structure assumption,
  /// returned through `condition`, and watched by a monitor unless the
  /// sources cannot coincide.
  EvidenceRelation resolve_consequent_conflict(BeliefNetwork& net, const Term& existing, const Term& incoming,
                                               const SourceDistribution& existing_source,
                                               const SourceDistribution& incoming_source,
                                               std::optional<AssumptionId>& condition) {
    condition.reset();
    auto pair = pair_key(existing, incoming);
    if (known_same_.contains(pair)) return EvidenceRelation::Shared;
    if (known_independent_.contains(pair)) return EvidenceRelation::Independent;

    double p_shared = shared_source_probability(existing_source, incoming_source);
    if (p_shared >= kSharedThreshold) return EvidenceRelation::Shared;

    Term statement = evidence_statement("Independent", existing, incoming);
    auto a = net.atms().create_assumption(AssumptionKind::Structure, std::nullopt,
                                          unique_name(net, "indep_" + compact(existing) + "_" + compact(incoming)),
                                          statement.key());
    assumptions_.push_back(StructureAssumption{a, statement, false});
    events_.push_back({StructureEvent::Kind::Assuming, statement});
    condition = a;
    if (p_shared > 0) install_monitor(evidence_statement("Same", existing, incoming), assumptions_.size() - 1, existing,
                                      incoming);
    return EvidenceRelation::Independent;
  }

  Monitor& install_monitor(Term trigger, std::size_t structure, Term existing, Term incoming) {
    if (!trigger.is_ground()) throw ModelError("monitor trigger must be ground: " + trigger.str());
    if (find_monitor(trigger)) throw ModelError("a monitor on " + trigger.str() + " is already installed");
    if (structure >= assumptions_.size()) throw ModelError("monitor needs a recorded structure assumption");
    events_.push_back({StructureEvent::Kind::Monitoring, trigger});
    monitors_.push_back(Monitor{std::move(trigger), structure, std::move(existing), std::move(incoming), false});
    return monitors_.back();
  }

  /// Installs the justifications linking a report's evidence to its values.
  void attach(BeliefNetwork& net, EvidenceAttachment att) {
    auto key = att.report.key();
    if (attachments_.contains(key)) throw ModelError("evidence for " + att.report.str() + " is already attached");
    if (att.shared_with) {
      link(net, root(*att.shared_with), att.value_nodes);
    } else {
      for (std::size_t i = 0; i < att.value_nodes.size(); ++i) {
        std::vector<Antecedent> ants{att.value_evidence[i]};
        for (auto c : att.conditions) ants.emplace_back(c);
        net.atms().justify(ants, att.value_nodes[i]);
      }
    }
    attachments_.emplace(std::move(key), std::move(att));
  }

  bool is_structural_fact(const Term& fact) const {
    return (fact.has_head("Same") || fact.has_head("Independent")) && fact.size() == 4 &&
           fact[1].is_symbol("evidence-for");
  }

  /// Handles `(Same evidence-for r1 r2)` and `(Independent evidence-for r1 r2)`.
  /// A matching monitor fires at most once.
  void assert_fact(BeliefNetwork& net, const Term& fact) {
    if (!is_structural_fact(fact)) throw ModelError("not a structural fact: " + fact.str());
    auto pair = pair_key(fact[2], fact[3]);
    if (fact.has_head("Independent")) {
      if (known_same_.contains(pair)) throw ModelError("reports already known to share evidence: " + fact.str());
      known_independent_.insert(pair);
      return;
    }
    if (known_independent_.contains(pair)) throw ModelError("reports already known to be independent: " + fact.str());
    if (!known_same_.insert(pair).second) return;
    for (auto& m : monitors_)
      if (!m.fired && pair_key(m.existing_report, m.incoming_report) == pair) restructure_shared_evidence(net, m);
  }

  /// Retracts the independence assumption behind `monitor` and lets the
  /// incoming report share the existing report's evidence.
  void restructure_shared_evidence(BeliefNetwork& net, Monitor& monitor) {
    if (monitor.fired) throw ModelError("monitor on " + monitor.trigger.str() + " has already fired");
    monitor.fired = true;
    retract(net, monitor.structure);
    auto* incoming = mutable_attachment(monitor.incoming_report);
    if (!incoming) throw ModelError("no evidence attached for " + monitor.incoming_report.str());
    link(net, root(monitor.existing_report), incoming->value_nodes);
  }

  /// Retracts a recorded structure assumption and announces it.
  void retract(BeliefNetwork& net, std::size_t structure) {
    auto& s = assumptions_.at(structure);
    if (s.retracted) return;
    events_.push_back({StructureEvent::Kind::Retracting, s.statement});
    net.retract_assumption(s.assumption);
    s.retracted = true;
  }

  std::optional<std::size_t> find_structure(const Term& statement) const {
    for (std::size_t i = 0; i < assumptions_.size(); ++i)
      if (assumptions_[i].statement == statement) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> find_structure(AssumptionId a) const {
    for (std::size_t i = 0; i < assumptions_.size(); ++i)
      if (assumptions_[i].assumption == a) return i;
    return std::nullopt;
  }

  const Monitor* find_monitor(const Term& trigger) const {
    for (const auto& m : monitors_)
      if (m.trigger == trigger) return &m;
    return nullptr;
  }

 private:
  static std::pair<std::string, std::string> pair_key(const Term& a, const Term& b) {
    auto x = a.key(), y = b.key();
    if (y < x) std::swap(x, y);
    return {std::move(x), std::move(y)};
  }

  static std::string compact(const Term& t) {
    if (t.is_atom()) return t.text();
    std::string out;
    for (const auto& item : t.items()) out += compact(item);
    return out;
  }

  static std::string unique_name(const BeliefNetwork& net, std::string base) {
    std::string name = base;
    for (int i = 2; net.atms().find(Term::symbol(name)); ++i) name = base + "'" + std::to_string(i);
    return name;
  }

  EvidenceAttachment* mutable_attachment(const Term& report) {
    auto it = attachments_.find(report.key());
    return it == attachments_.end() ? nullptr : &it->second;
  }

  /// The attachment that owns the evidence `report` ultimately uses.
  const EvidenceAttachment& root(const Term& report) const {
    const EvidenceAttachment* att = attachment(report);
    if (!att) throw ModelError("no evidence attached for " + report.str());
    while (att->shared_with) att = attachment(*att->shared_with);
    return *att;
  }

  static void link(BeliefNetwork& net, const EvidenceAttachment& source, const std::vector<NodeId>& targets) {
    if (source.value_evidence.size() != targets.size())
      throw ModelError("cannot share evidence of " + source.report.str() + ": value counts differ");
    for (std::size_t i = 0; i < targets.size(); ++i) net.atms().justify({source.value_evidence[i]}, targets[i]);
  }

  std::map<std::string, EvidenceAttachment> attachments_;
  std::vector<StructureAssumption> assumptions_;
  std::vector<Monitor> monitors_;
  std::set<std::pair<std::string, std::string>> known_same_;
  std::set<std::pair<std::string, std::string>> known_independent_;
  std::vector<StructureEvent> events_;
};

}  // namespace hum
