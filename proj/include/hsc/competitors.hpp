#pragma once

#include "hsc/control.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hsc {

enum class CompetitorKind { optimum, zero, scaled, perturbed, random_ray, negated };

struct CompetitorSpec {
  CompetitorKind kind = CompetitorKind::zero;
  std::string label;
  double factor = 1.0;      // scaled
  double delta = 0.1;       // perturbed
  int axis = 0;             // perturbed
  std::uint64_t seed = 1;   // random_ray
  double magnitude = 1.0;   // random_ray
};

const char* to_string(CompetitorKind k);

/// Competitor feedback derived from the optimum:
///   optimum     the optimum itself
///   zero        u = 0
///   scaled      factor * v_hat
///   perturbed   projection of v_hat + delta e_axis onto the cone
///   random_ray  constant magnitude * d with d a projected Gaussian direction
///   negated     -v_hat, not projected (rejected unless the cone is symmetric)
FeedbackControl make_competitor(const HomogeneousModel& model, const FeedbackControl& optimum,
                                const CompetitorSpec& spec);

/// Zero, two scalings, a perturbation and two random rays.
std::vector<CompetitorSpec> default_competitors();

}  // namespace hsc
