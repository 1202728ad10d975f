#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace hum {

template <typename Tag>
struct StrongId {
  std::uint32_t value = 0;

  constexpr StrongId() = default;
  constexpr explicit StrongId(std::uint32_t v) : value(v) {}
  constexpr explicit StrongId(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}

  constexpr std::size_t index() const noexcept { return value; }
  friend constexpr auto operator<=>(StrongId, StrongId) = default;
};

struct NodeTag {};
struct AssumptionTag {};
struct ChooseSetTag {};

using NodeId = StrongId<NodeTag>;
using AssumptionId = StrongId<AssumptionTag>;
using ChooseSetId = StrongId<ChooseSetTag>;

}  // namespace hum

template <typename Tag>
struct std::hash<hum::StrongId<Tag>> {
  std::size_t operator()(hum::StrongId<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
