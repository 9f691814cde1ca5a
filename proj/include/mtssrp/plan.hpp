#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace mtssrp {

enum class SolverKind { sort, greedy, exhaustive, random, fixed };

SolverKind parse_solver(std::string_view name);
std::string_view to_string(SolverKind solver) noexcept;

/// The coordinates to observe at one tick.
struct SamplingPlan {
  std::vector<std::size_t> indices;  ///< strictly increasing
  SolverKind solver = SolverKind::fixed;

  /// Throws std::invalid_argument unless the plan has exactly q distinct indices below p.
  void validate(std::size_t p, std::size_t q) const;
  bool operator==(const SamplingPlan&) const = default;
};

SamplingPlan full_plan(std::size_t p);

}  // namespace mtssrp
