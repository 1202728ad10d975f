#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hum/structure.hpp"

namespace hum {

/// A variable declaration. Patterns with `?vars` describe a class of
/// variables (`(Draw ?n)`); ground patterns are a single variable (`Urn`).
struct VariableClass {
  Term pattern;
  std::vector<std::string> values;

  bool is_schema() const { return !pattern.is_ground(); }

  std::optional<std::size_t> value_index(std::string_view v) const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (detail::iequals(values[i], v)) return i;
    return std::nullopt;
  }
};

/// One `->` line of a relation: child distribution given one parent value.
struct Rule {
  std::size_t parent_value = 0;
  /// Aligned with the child class's values, after residual filling.
  std::vector<double> distribution;

  bool deterministic() const {
    return std::all_of(distribution.begin(), distribution.end(), [](double p) { return p == 0.0 || p == 1.0; });
  }
};

struct RelationSchema {
  std::size_t parent_class = 0;
  std::size_t child_class = 0;
  std::vector<Rule> rules;
};

struct InstanceRecord {
  Term term;
  std::size_t class_index = 0;
  std::vector<NodeId> value_nodes;
  std::optional<ChooseSetId> marginal;
};

struct MarginalDecl {
  Term target;
  std::vector<double> weights;
};

inline constexpr double kMassTolerance = 1e-9;

/// The modeling language: variables, relations, marginals, instances and
/// facts, compiled incrementally into a belief network.
class Model {
 public:
  const VariableClass& declare_variable(Term pattern, std::vector<std::string> values) {
    if (!pattern.is_symbol() && !pattern.is_list()) throw ModelError("bad variable pattern " + pattern.str());
    if (pattern.is_variable()) throw ModelError("variable pattern cannot be a bare logical variable");
    if (find_class(pattern)) throw ModelError("variable " + pattern.str() + " is already declared");
    if (values.empty()) throw ModelError("variable " + pattern.str() + " needs at least one value");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].empty() || values[i].front() == '?') throw ModelError("bad value name '" + values[i] + "'");
      for (std::size_t j = 0; j < i; ++j)
        if (detail::iequals(values[i], values[j]))
          throw ModelError("value " + values[i] + " listed twice for " + pattern.str());
    }
    std::vector<std::string> vars;
    collect_variables(pattern, vars);
    std::sort(vars.begin(), vars.end());
    if (std::adjacent_find(vars.begin(), vars.end()) != vars.end())
      throw ModelError("logical variables in " + pattern.str() + " must be distinct");

    classes_.push_back(VariableClass{std::move(pattern), std::move(values)});
    std::size_t index = classes_.size() - 1;
    if (!classes_[index].is_schema()) instantiate(classes_[index].pattern);
    return classes_[index];
  }

  /// Declares `(Relation parent child rule...)` and connects every existing
  /// matching parent/child instance pair.
  const RelationSchema& declare_relation(const Term& parent, const Term& child, const std::vector<Term>& rules) {
    auto pc = find_class(parent);
    auto cc = find_class(child);
    if (!pc) throw ModelError("unknown variable " + parent.str());
    if (!cc) throw ModelError("unknown variable " + child.str());
    if (*pc == *cc) throw ModelError("a variable cannot be related to itself");
    for (const auto& r : relations_)
      if (r.parent_class == *pc && r.child_class == *cc)
        throw ModelError("relation " + parent.str() + " -> " + child.str() + " is already declared");

    RelationSchema schema{*pc, *cc, {}};
    for (const auto& r : rules) {
      Rule rule = parse_rule(r, schema);
      for (const auto& existing : schema.rules)
        if (existing.parent_value == rule.parent_value)
          throw ModelError("two rules for " + classes_[*pc].values[rule.parent_value] + " in relation " + parent.str());
      schema.rules.push_back(std::move(rule));
    }
    relations_.push_back(std::move(schema));
    std::size_t r = relations_.size() - 1;
    for (std::size_t p = 0; p < instances_.size(); ++p)
      if (instances_[p].class_index == *pc)
        for (std::size_t c = 0; c < instances_.size(); ++c)
          if (instances_[c].class_index == *cc) connect(r, p, c);
    return relations_[r];
  }

  /// Reads any of the accepted marginal shapes:
  /// `(Marginal Urn (Urn H1) .33 (Urn H2) .33 ...)`, `(Marginal (radio 1) .7 .3)`
  /// and `(Marginal x (.33 .33 .34))`.
  MarginalDecl parse_marginal(const Term& form) const {
    if (!form.has_head("Marginal") || form.size() < 3) throw ModelError("malformed marginal " + form.str());
    MarginalDecl decl{form[1], {}};
    auto cls = class_for_target(decl.target);
    const auto& values = classes_[cls].values;

    if (form.size() == 3 && form[2].is_list()) {
      for (const auto& w : form[2].items()) decl.weights.push_back(weight_of(w, form));
      return decl;
    }
    if (form[2].is_list()) {
      if (form.size() % 2 != 0) throw ModelError("marginal pairs must be (value) weight: " + form.str());
      decl.weights.assign(values.size(), -1.0);
      for (std::size_t i = 2; i + 1 < form.size(); i += 2) {
        const Term& prop = form[i];
        if (!prop.is_list() || prop.size() != 2 || !(prop[0] == decl.target) || !prop[1].is_atom())
          throw ModelError("marginal entry " + prop.str() + " is not a value of " + decl.target.str());
        auto v = classes_[cls].value_index(prop[1].text());
        if (!v) throw ModelError("unknown value " + prop[1].text() + " for " + decl.target.str());
        if (decl.weights[*v] >= 0) throw ModelError("value " + prop[1].text() + " listed twice in " + form.str());
        decl.weights[*v] = weight_of(form[i + 1], form);
      }
      if (std::find(decl.weights.begin(), decl.weights.end(), -1.0) != decl.weights.end())
        throw ModelError("marginal " + form.str() + " must give a weight for every value of " + decl.target.str());
      return decl;
    }
    for (std::size_t i = 2; i < form.size(); ++i) decl.weights.push_back(weight_of(form[i], form));
    return decl;
  }

  void declare_marginal(const MarginalDecl& decl) { declare_marginal(decl.target, decl.weights); }

  void declare_marginal(const Term& target, const std::vector<double>& weights) {
    auto cls = class_for_target(target);
    check_weights(classes_[cls], target, weights);
    if (!target.is_ground()) {
      if (!(classes_[cls].pattern == target)) throw ModelError("unknown variable " + target.str());
      for (const auto& m : class_marginals_)
        if (m.target == target) throw ModelError("marginal for " + target.str() + " is already declared");
      class_marginals_.push_back(MarginalDecl{target, weights});
      for (std::size_t i = 0; i < instances_.size(); ++i)
        if (instances_[i].class_index == cls) attach_marginal(i, weights);
      return;
    }
    auto inst = find_instance(target);
    if (!inst) throw ModelError(target.str() + " is not instantiated");
    attach_marginal(*inst, weights);
  }

  const InstanceRecord& instantiate(const Term& ground) {
    if (!ground.is_ground()) throw ModelError("instance term must be ground: " + ground.str());
    if (find_instance(ground)) throw ModelError(ground.str() + " is already instantiated");
    std::optional<std::size_t> cls;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      Bindings b;
      if (!unify(classes_[i].pattern, ground, b)) continue;
      if (cls) throw ModelError(ground.str() + " matches both " + classes_[*cls].pattern.str() + " and " +
                                classes_[i].pattern.str());
      cls = i;
    }
    if (!cls) throw ModelError("no variable declaration matches " + ground.str());

    InstanceRecord rec{ground, *cls, {}, std::nullopt};
    for (const auto& v : classes_[*cls].values) {
      Term prop = Term::list({ground, Term::symbol(v)});
      rec.value_nodes.push_back(net_.atms().create_node(prop));
    }
    for (std::size_t i = 0; i < rec.value_nodes.size(); ++i)
      for (std::size_t j = i + 1; j < rec.value_nodes.size(); ++j)
        net_.atms().justify({rec.value_nodes[i], rec.value_nodes[j]}, contradiction());

    instances_.push_back(std::move(rec));
    std::size_t index = instances_.size() - 1;
    instance_index_.emplace(ground.key(), index);
    for (std::size_t i = 0; i < instances_[index].value_nodes.size(); ++i)
      value_index_.emplace(net_.atms().node(instances_[index].value_nodes[i]).term.key(), std::make_pair(index, i));

    for (std::size_t r = 0; r < relations_.size(); ++r) {
      if (relations_[r].parent_class == *cls)
        for (std::size_t c = 0; c < instances_.size(); ++c)
          if (instances_[c].class_index == relations_[r].child_class) connect(r, index, c);
      if (relations_[r].child_class == *cls)
        for (std::size_t p = 0; p < instances_.size(); ++p)
          if (instances_[p].class_index == relations_[r].parent_class) connect(r, p, index);
    }
    for (const auto& m : class_marginals_)
      if (classes_[*cls].pattern == m.target) attach_marginal(index, m.weights);
    return instances_[index];
  }

  /// Asserts an observation `(X v)`, a marginal, or a structural fact.
  void assert_fact(const Term& fact) {
    if (fact.has_head("Marginal")) {
      declare_marginal(parse_marginal(fact));
    } else if (structure_.is_structural_fact(fact)) {
      structure_.assert_fact(net_, fact);
    } else {
      net_.atms().assert_premise(value_node(fact));
    }
  }

  double query_probability(const Term& prop) const { return net_.probability_of(node_for(prop)); }

  /// Retracts a structure assumption named by its statement or display name.
  void retract(const Term& target) {
    std::optional<std::size_t> s;
    if (target.is_symbol()) {
      auto a = net_.atms().find_assumption(target.text());
      if (!a) throw ModelError("unknown assumption " + target.str());
      s = structure_.find_structure(*a);
      if (!s) net_.retract_assumption(*a);  // throws for distribution assumptions
    } else {
      s = structure_.find_structure(target);
      if (!s) throw ModelError("no structure assumption records " + target.str());
    }
    if (s) structure_.retract(net_, *s);
  }

  /// Node for a value proposition `(X v)`.
  NodeId value_node(const Term& prop) const {
    auto it = value_index_.find(prop.key());
    if (it == value_index_.end()) throw ModelError("unknown proposition " + prop.str());
    return instances_[it->second.first].value_nodes[it->second.second];
  }

  /// Any node by term: value propositions or assumption names.
  NodeId node_for(const Term& term) const {
    if (auto n = net_.atms().find(term)) return *n;
    throw ModelError("unknown proposition " + term.str());
  }

  std::optional<std::size_t> find_instance(const Term& ground) const {
    auto it = instance_index_.find(ground.key());
    if (it == instance_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find_class(const Term& pattern) const {
    for (std::size_t i = 0; i < classes_.size(); ++i)
      if (classes_[i].pattern == pattern) return i;
    return std::nullopt;
  }

  BeliefNetwork& network() noexcept { return net_; }
  const BeliefNetwork& network() const noexcept { return net_; }
  StructureManager& structure() noexcept { return structure_; }
  const StructureManager& structure() const noexcept { return structure_; }
  const std::vector<VariableClass>& classes() const noexcept { return classes_; }
  const std::vector<RelationSchema>& relations() const noexcept { return relations_; }
  const std::vector<InstanceRecord>& instances() const noexcept { return instances_; }
  /// The value-exclusion contradiction node, once some instance needed it.
  std::optional<NodeId> contradiction_node() const noexcept { return contradiction_; }

 private:
  static bool is_proposition(const Term& t) { return t.is_list() && t.size() == 2 && t[1].is_atom(); }

  static bool is_entry(const Term& t) { return t.is_list() && t.size() == 2 && is_proposition(t[0]) && t[1].is_number(); }

  static double weight_of(const Term& t, const Term& form) {
    if (!t.is_number()) throw ModelError("expected a number, got " + t.str() + " in " + form.str());
    return t.number_value();
  }

  static std::string compact(const Term& t) {
    if (t.is_atom()) return t.text();
    std::string out;
    for (const auto& item : t.items()) out += compact(item);
    return out;
  }

  std::size_t class_for_target(const Term& target) const {
    if (target.is_ground()) {
      if (auto inst = find_instance(target)) return instances_[*inst].class_index;
      for (std::size_t i = 0; i < classes_.size(); ++i) {
        Bindings b;
        if (unify(classes_[i].pattern, target, b)) throw ModelError(target.str() + " is not instantiated");
      }
    } else if (auto cls = find_class(target)) {
      return *cls;
    }
    throw ModelError("unknown variable " + target.str());
  }

  static void check_weights(const VariableClass& cls, const Term& target, const std::vector<double>& weights) {
    if (weights.size() != cls.values.size())
      throw ModelError("marginal for " + target.str() + " has " + std::to_string(weights.size()) + " weights but " +
                       std::to_string(cls.values.size()) + " values");
    double total = 0;
    for (double w : weights) {
      if (!(w >= 0) || !std::isfinite(w)) throw ModelError("marginal weights must be nonnegative: " + target.str());
      total += w;
    }
    if (!(total > 0)) throw ModelError("marginal for " + target.str() + " has zero total weight");
  }

  Rule parse_rule(const Term& form, const RelationSchema& schema) const {
    if (!form.has_head("->") || form.size() < 3) throw ModelError("malformed rule " + form.str());
    const auto& parent = classes_[schema.parent_class];
    const auto& child = classes_[schema.child_class];

    Term lhs = form[1];
    if (lhs.is_list() && lhs.size() == 1 && is_proposition(lhs[0])) lhs = lhs[0];
    if (!is_proposition(lhs) || !(lhs[0] == parent.pattern))
      throw ModelError("rule condition " + form[1].str() + " is not a value of " + parent.pattern.str());
    auto pv = parent.value_index(lhs[1].text());
    if (!pv) throw ModelError("unknown value " + lhs[1].text() + " for " + parent.pattern.str());

    std::vector<Term> entries;
    if (form.size() == 3 && !is_entry(form[2]) && form[2].is_list())
      entries = form[2].items();
    else
      entries.assign(form.items().begin() + 2, form.items().end());

    std::vector<std::optional<double>> listed(child.values.size());
    for (const auto& e : entries) {
      if (!is_entry(e) || !(e[0][0] == child.pattern))
        throw ModelError("rule entry " + e.str() + " is not ((" + child.pattern.str() + " value) probability)");
      auto cv = child.value_index(e[0][1].text());
      if (!cv) throw ModelError("unknown value " + e[0][1].text() + " for " + child.pattern.str());
      if (listed[*cv]) throw ModelError("value " + e[0][1].text() + " listed twice in " + form.str());
      double p = e[1].number_value();
      if (!(p >= 0 && p <= 1)) throw ModelError("probability out of [0, 1] in " + form.str());
      listed[*cv] = p;
    }

    double total = 0;
    std::size_t omitted = 0;
    for (const auto& p : listed) {
      if (p)
        total += *p;
      else
        ++omitted;
    }
    if (total > 1 + kMassTolerance) throw ModelError("rule probabilities exceed 1 in " + form.str());

    Rule rule{*pv, std::vector<double>(child.values.size(), 0.0)};
    for (std::size_t i = 0; i < listed.size(); ++i) rule.distribution[i] = listed[i].value_or(0.0);
    if (total < 1 - kMassTolerance) {
      if (omitted != 1)
        throw ModelError("rule " + form.str() + " leaves mass " + std::to_string(1 - total) + " unassigned over " +
                         std::to_string(omitted) + " values");
      for (std::size_t i = 0; i < listed.size(); ++i)
        if (!listed[i]) rule.distribution[i] = 1 - total;
    }
    return rule;
  }

  NodeId contradiction() {
    if (!contradiction_) {
      contradiction_ = net_.atms().create_node(Term::symbol("*contradiction*"));
      net_.atms().declare_contradiction(*contradiction_);
    }
    return *contradiction_;
  }

  std::string unique_name(std::string base) const {
    std::string name = base;
    for (int i = 2; net_.atms().find(Term::symbol(name)); ++i) name = base + "'" + std::to_string(i);
    return name;
  }

  void connect(std::size_t r, std::size_t p, std::size_t c) {
    const auto& rel = relations_[r];
    const auto& parent = instances_[p];
    const auto& child = instances_[c];
    Bindings b;
    if (!unify(classes_[rel.parent_class].pattern, parent.term, b) ||
        !unify(classes_[rel.child_class].pattern, child.term, b))
      return;
    if (!connected_.insert({r, p, c}).second) return;

    if (structure_.attachment(parent.term))
      for (auto other : parents_of_[c])
        if (other != p && structure_.attachment(instances_[other].term))
          throw ModelError("evidence for " + parent.term.str() + " is already attached; declare its relation to " +
                           child.term.str() + " before its marginal");
    parents_of_[c].push_back(p);
    children_of_[p].push_back(c);

    const auto& child_values = classes_[child.class_index].values;
    const auto& parent_values = classes_[parent.class_index].values;
    for (const auto& rule : rel.rules) {
      NodeId pnode = parent.value_nodes[rule.parent_value];
      if (rule.deterministic()) {
        for (std::size_t i = 0; i < rule.distribution.size(); ++i)
          if (rule.distribution[i] == 1.0) net_.atms().justify({pnode}, child.value_nodes[i]);
        continue;
      }
      std::vector<std::pair<AssumptionId, double>> members;
      std::vector<std::size_t> targets;
      for (std::size_t i = 0; i < rule.distribution.size(); ++i) {
        if (rule.distribution[i] <= 0) continue;
        const auto& pv = parent_values[rule.parent_value];
        auto name = unique_name("a_" + compact(child.term) + "_" + child_values[i] + "|" + compact(parent.term) + "=" + pv);
        auto origin = "cond " + child.term.key() + " " + detail::lowercase(child_values[i]) + " | " +
                      parent.term.key() + " " + detail::lowercase(pv);
        members.emplace_back(
            net_.atms().create_assumption(AssumptionKind::Distribution, rule.distribution[i], name, origin),
            rule.distribution[i]);
        targets.push_back(i);
      }
      Term tag = Term::list({child.term, Term::symbol("given"), parent.term, Term::symbol(parent_values[rule.parent_value])});
      net_.register_choose(members, tag);
      for (std::size_t k = 0; k < members.size(); ++k)
        net_.atms().justify({pnode, members[k].first}, child.value_nodes[targets[k]]);
    }
  }

  SourceDistribution source_of(const Term& report, const Term& other) const {
    Term src = Term::list({Term::symbol("source"), report});
    auto inst = find_instance(src);
    auto fail = [&](const std::string& why) {
      return ModelError("cannot decide whether " + report.str() + " and " + other.str() + " report the same evidence: " +
                        src.str() + " " + why);
    };
    if (!inst) throw fail("is not instantiated");
    const auto& rec = instances_[*inst];
    if (!rec.marginal) throw fail("has no marginal");
    const auto& set = net_.choose_set(*rec.marginal);
    SourceDistribution d;
    d.values = classes_[rec.class_index].values;
    for (std::size_t i = 0; i < set.members.size(); ++i) d.weights.push_back(set.normalized(i));
    return d;
  }

  void attach_marginal(std::size_t index, const std::vector<double>& weights) {
    auto& rec = instances_[index];
    if (rec.marginal) throw ModelError("marginal for " + rec.term.str() + " is already declared");
    const auto& cls = classes_[rec.class_index];
    check_weights(cls, rec.term, weights);

    std::vector<std::pair<AssumptionId, double>> members;
    for (std::size_t i = 0; i < cls.values.size(); ++i) {
      std::string base = rec.term.is_atom() ? "a_" + cls.values[i] : "a_" + compact(rec.term) + "_" + cls.values[i];
      if (rec.term.is_atom() && net_.atms().find(Term::symbol(base))) base = "a_" + compact(rec.term) + "_" + cls.values[i];
      auto origin = "marginal " + rec.term.key() + " " + detail::lowercase(cls.values[i]);
      members.emplace_back(
          net_.atms().create_assumption(AssumptionKind::Distribution, weights[i], unique_name(base), origin), weights[i]);
    }
    auto set = net_.register_choose(members, rec.term);
    rec.marginal = set;

    EvidenceAttachment att{rec.term, set, {}, rec.value_nodes, {}, std::nullopt};
    for (const auto& m : members) att.value_evidence.push_back(m.first);

    // Other reports already feeding the same consequents.
    std::vector<std::size_t> existing;
    for (auto c : children_of_[index])
      for (auto p : parents_of_[c])
        if (p != index && structure_.attachment(instances_[p].term) &&
            std::find(existing.begin(), existing.end(), p) == existing.end())
          existing.push_back(p);

    std::vector<std::pair<SourceDistribution, SourceDistribution>> sources;
    for (auto p : existing) sources.emplace_back(source_of(instances_[p].term, rec.term), source_of(rec.term, instances_[p].term));

    for (std::size_t k = 0; k < existing.size(); ++k) {
      const Term& other = instances_[existing[k]].term;
      if (structure_.would_share(other, rec.term, sources[k].first, sources[k].second)) {
        att.shared_with = other;
        structure_.attach(net_, std::move(att));
        return;
      }
    }
    for (std::size_t k = 0; k < existing.size(); ++k) {
      std::optional<AssumptionId> condition;
      structure_.resolve_consequent_conflict(net_, instances_[existing[k]].term, rec.term, sources[k].first,
                                             sources[k].second, condition);
      if (condition) att.conditions.push_back(*condition);
    }
    structure_.attach(net_, std::move(att));
  }

  BeliefNetwork net_;
  StructureManager structure_;
  std::optional<NodeId> contradiction_;
  std::vector<VariableClass> classes_;
  std::vector<RelationSchema> relations_;
  std::vector<InstanceRecord> instances_;
  std::vector<MarginalDecl> class_marginals_;
  std::map<std::string, std::size_t> instance_index_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> value_index_;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> connected_;
  std::map<std::size_t, std::vector<std::size_t>> parents_of_;
  std::map<std::size_t, std::vector<std::size_t>> children_of_;
};

}  // namespace hum
