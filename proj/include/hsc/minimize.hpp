#pragma once

#include "hsc/cone.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace hsc {

struct MinimizerConfig {
  int multistart_count = 8;
  int max_iterations = 500;
  double gradient_step_tolerance = 1e-9;
  double value_tolerance = 1e-9;
  double radial_search_max = 1e6;
  double finite_difference_h = 1e-6;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;

  void validate() const;
};

enum class MinimizeStatus { converged, iteration_cap, divergent_to_minus_infinity };

const char* to_string(MinimizeStatus s);

struct MinimizeResult {
  Vec argmin;
  double value = 0.0;
  MinimizeStatus status = MinimizeStatus::converged;
  long evaluations = 0;
};

using Objective = std::function<double(const Vec&)>;

/// Minimizes `objective` over the cone.
///
/// Projected gradient descent (central-difference gradients, Barzilai-Borwein
/// trial steps, Armijo backtracking along the projection arc), multi-started
/// from the origin, the caller's warm starts, the cone's spanning directions
/// and random cone samples. A radial probe along spanning and escape
/// directions reports `divergent_to_minus_infinity` when the objective keeps
/// decreasing with slope below -value_tolerance over the last decade up to
/// radial_search_max.
///
/// The objective is evaluated within finite_difference_h of the cone, so it
/// must be defined on a neighbourhood of it. For nonconvex objectives the
/// result is a best-effort upper bound on the infimum.
///
/// Ties (values within value_tolerance) resolve to the smallest norm, then
/// lexicographically smallest argmin.
MinimizeResult minimize(const Cone& cone, const Objective& objective, const MinimizerConfig& config = {},
                        std::span<const Vec> warm_starts = {});

}  // namespace hsc
