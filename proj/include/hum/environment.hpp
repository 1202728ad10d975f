#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <iterator>
#include <vector>

#include "hum/ids.hpp"

namespace hum {

/// A set of assumptions, kept sorted and duplicate-free.
class Environment {
 public:
  using const_iterator = std::vector<AssumptionId>::const_iterator;

  Environment() = default;
  Environment(std::initializer_list<AssumptionId> ids) : ids_(ids) { normalize(); }
  explicit Environment(std::vector<AssumptionId> ids) : ids_(std::move(ids)) { normalize(); }

  bool empty() const noexcept { return ids_.empty(); }
  std::size_t size() const noexcept { return ids_.size(); }
  const_iterator begin() const noexcept { return ids_.begin(); }
  const_iterator end() const noexcept { return ids_.end(); }
  const std::vector<AssumptionId>& ids() const noexcept { return ids_; }

  bool contains(AssumptionId a) const { return std::binary_search(ids_.begin(), ids_.end(), a); }

  bool subset_of(const Environment& other) const {
    if (size() > other.size()) return false;
    return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
  }

  Environment united(const Environment& other) const {
    Environment out;
    out.ids_.reserve(size() + other.size());
    std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(), std::back_inserter(out.ids_));
    return out;
  }

  Environment without(AssumptionId a) const {
    Environment out;
    out.ids_.reserve(size());
    std::copy_if(ids_.begin(), ids_.end(), std::back_inserter(out.ids_), [a](AssumptionId x) { return x != a; });
    return out;
  }

  /// Canonical order: smaller environments first, then lexicographic.
  friend std::strong_ordering operator<=>(const Environment& a, const Environment& b) {
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    return std::lexicographical_compare_three_way(a.ids_.begin(), a.ids_.end(), b.ids_.begin(), b.ids_.end());
  }
  friend bool operator==(const Environment& a, const Environment& b) = default;

 private:
  void normalize() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  std::vector<AssumptionId> ids_;
};

/// A minimal antichain of environments in canonical order.
class EnvironmentSet {
 public:
  using const_iterator = std::vector<Environment>::const_iterator;

  EnvironmentSet() = default;
  EnvironmentSet(std::initializer_list<Environment> envs) {
    for (const auto& e : envs) add_minimal(e);
  }

  bool empty() const noexcept { return envs_.empty(); }
  std::size_t size() const noexcept { return envs_.size(); }
  const_iterator begin() const noexcept { return envs_.begin(); }
  const_iterator end() const noexcept { return envs_.end(); }
  const std::vector<Environment>& environments() const noexcept { return envs_; }
  const Environment& operator[](std::size_t i) const { return envs_[i]; }

  bool contains(const Environment& env) const { return std::binary_search(envs_.begin(), envs_.end(), env); }

  /// True iff some member is a subset of `env`.
  bool subsumes(const Environment& env) const {
    return std::any_of(envs_.begin(), envs_.end(), [&](const Environment& e) { return e.subset_of(env); });
  }

  /// Inserts `env` unless a member subsumes it; drops members it subsumes.
  /// Returns whether `env` was inserted.
  bool add_minimal(const Environment& env) {
    if (subsumes(env)) return false;
    remove_supersets_of(env);
    envs_.insert(std::lower_bound(envs_.begin(), envs_.end(), env), env);
    return true;
  }

  /// Removes every member that is a superset of `env`; returns how many.
  std::size_t remove_supersets_of(const Environment& env) {
    auto keep = std::remove_if(envs_.begin(), envs_.end(), [&](const Environment& e) { return env.subset_of(e); });
    std::size_t removed = static_cast<std::size_t>(envs_.end() - keep);
    envs_.erase(keep, envs_.end());
    return removed;
  }

  void clear() noexcept { envs_.clear(); }

  bool is_antichain() const {
    for (std::size_t i = 0; i < envs_.size(); ++i)
      for (std::size_t j = 0; j < envs_.size(); ++j)
        if (i != j && envs_[i].subset_of(envs_[j])) return false;
    return true;
  }

  friend bool operator==(const EnvironmentSet&, const EnvironmentSet&) = default;

 private:
  std::vector<Environment> envs_;
};

/// A node label: DNF over assumptions. Empty means "holds nowhere".
using Label = EnvironmentSet;

}  // namespace hum
