#include "hsc/competitors.hpp"

#include <random>

namespace hsc {

const char* to_string(CompetitorKind k) {
  switch (k) {
    case CompetitorKind::optimum: return "optimum";
    case CompetitorKind::zero: return "zero";
    case CompetitorKind::scaled: return "scaled";
    case CompetitorKind::perturbed: return "perturbed";
    case CompetitorKind::random_ray: return "random_ray";
    case CompetitorKind::negated: return "negated";
  }
  return "?";
}

FeedbackControl make_competitor(const HomogeneousModel& model, const FeedbackControl& optimum,
                                const CompetitorSpec& spec) {
  const Cone& cone = model.cone();
  const int m = model.m();
  if (spec.kind == CompetitorKind::perturbed && (spec.axis < 0 || spec.axis >= m))
    throw DomainError("competitor: perturbation axis out of range");

  Vec ray_plus, ray_minus;
  if (spec.kind == CompetitorKind::random_ray) {
    std::mt19937_64 rng(spec.seed);
    ray_plus = spec.magnitude * cone.sample(rng).normalized();
    ray_minus = spec.magnitude * cone.sample(rng).normalized();
  }

  auto transform = [&](const std::vector<std::vector<Vec>>& layers, const Vec& ray) {
    std::vector<std::vector<Vec>> out = layers;
    for (auto& layer : out) {
      for (Vec& v : layer) {
        switch (spec.kind) {
          case CompetitorKind::optimum: break;
          case CompetitorKind::zero: v.setZero(); break;
          case CompetitorKind::scaled: v *= spec.factor; break;
          case CompetitorKind::perturbed:
            v(spec.axis) += spec.delta;
            v = cone.project(v);
            break;
          case CompetitorKind::random_ray: v = ray; break;
          case CompetitorKind::negated: v = -v; break;
        }
      }
    }
    return out;
  };
  return make_feedback(model, optimum.grid, optimum.mode, transform(optimum.v_plus, ray_plus),
                       transform(optimum.v_minus, ray_minus));
}

std::vector<CompetitorSpec> default_competitors() {
  std::vector<CompetitorSpec> out;
  CompetitorSpec zero{CompetitorKind::zero, "zero"};
  out.push_back(zero);
  for (double f : {0.5, 1.5}) {
    CompetitorSpec s{CompetitorKind::scaled, f == 0.5 ? "scaled(0.5)" : "scaled(1.5)"};
    s.factor = f;
    out.push_back(s);
  }
  CompetitorSpec pert{CompetitorKind::perturbed, "perturbed(0.1 e0)"};
  out.push_back(pert);
  for (std::uint64_t seed : {1u, 2u}) {
    CompetitorSpec r{CompetitorKind::random_ray, "random_ray(seed=" + std::to_string(seed) + ")"};
    r.seed = seed;
    out.push_back(r);
  }
  return out;
}

}  // namespace hsc
