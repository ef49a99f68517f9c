#include "hsc/cone.hpp"

#include <algorithm>
#include <limits>

namespace hsc {

namespace {

void require_nonzero(const Vec& d, const char* what) {
  if (d.size() < 1) throw DomainError(std::string(what) + ": empty vector");
  if (!d.allFinite() || d.norm() == 0.0) throw DomainError(std::string(what) + ": generator must be a finite nonzero vector");
}

}  // namespace

Cone Cone::full_space(int m) {
  if (m < 1) throw DomainError("cone dimension must be >= 1");
  return Cone(FullSpace{m}, m);
}

Cone Cone::orthant(int m) {
  if (m < 1) throw DomainError("cone dimension must be >= 1");
  return Cone(NonnegativeOrthant{m}, m);
}

Cone Cone::ray(Vec direction) {
  require_nonzero(direction, "ray direction");
  const int m = static_cast<int>(direction.size());
  return Cone(SingleRay{std::move(direction)}, m);
}

Cone Cone::generated(Mat generators) {
  if (generators.rows() < 1 || generators.cols() < 1) throw DomainError("generator matrix must be at least 1x1");
  for (Eigen::Index j = 0; j < generators.cols(); ++j) require_nonzero(generators.col(j), "cone generator");
  const int m = static_cast<int>(generators.rows());
  return Cone(FinitelyGenerated{std::move(generators)}, m);
}

std::string Cone::kind() const {
  return std::visit(
      [](const auto& c) -> std::string {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FullSpace>) return "full";
        else if constexpr (std::is_same_v<C, NonnegativeOrthant>) return "orthant";
        else if constexpr (std::is_same_v<C, SingleRay>) return "ray";
        else return "generated";
      },
      rep_);
}

bool Cone::is_symmetric() const {
  if (is_full_space()) return true;
  if (const auto* g = std::get_if<FinitelyGenerated>(&rep_)) {
    for (Eigen::Index j = 0; j < g->generators.cols(); ++j) {
      const Vec neg = -g->generators.col(j);
      if (!contains(neg, 1e-10 * neg.norm())) return false;
    }
    return true;
  }
  return false;
}

bool Cone::contains(const Vec& v, double tol) const {
  if (v.size() != m_) {
    throw DimensionMismatch("cone membership: expected dimension " + std::to_string(m_) + ", got " +
                            std::to_string(v.size()));
  }
  if (!v.allFinite()) return false;
  return distance(v) <= tol;
}

Vec Cone::project(const Vec& v) const {
  if (v.size() != m_) throw DimensionMismatch("cone projection: dimension mismatch");
  return std::visit(
      [&](const auto& c) -> Vec {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FullSpace>) {
          return v;
        } else if constexpr (std::is_same_v<C, NonnegativeOrthant>) {
          return v.cwiseMax(0.0);
        } else if constexpr (std::is_same_v<C, SingleRay>) {
          const double s = std::max(c.direction.dot(v), 0.0) / c.direction.squaredNorm();
          return s * c.direction;
        } else {
          return c.generators * nnls(c.generators, v);
        }
      },
      rep_);
}

std::vector<Vec> Cone::spanning_directions() const {
  std::vector<Vec> out;
  std::visit(
      [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FullSpace>) {
          for (int i = 0; i < m_; ++i) {
            out.push_back(Vec::Unit(m_, i));
            out.push_back(-Vec::Unit(m_, i));
          }
        } else if constexpr (std::is_same_v<C, NonnegativeOrthant>) {
          for (int i = 0; i < m_; ++i) out.push_back(Vec::Unit(m_, i));
        } else if constexpr (std::is_same_v<C, SingleRay>) {
          out.push_back(c.direction);
        } else {
          for (Eigen::Index j = 0; j < c.generators.cols(); ++j) out.push_back(c.generators.col(j));
        }
      },
      rep_);
  return out;
}

Vec nnls(const Mat& A, const Vec& b, int max_iterations) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size()) throw DimensionMismatch("nnls: row count mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);

  Vec x = Vec::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * std::max<double>(1.0, A.norm()) *
                     static_cast<double>(std::max(A.rows(), n)) * std::max(1.0, b.norm());

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Mat Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
    const Vec sp = Ap.colPivHouseholderQr().solve(b);
    Vec s = Vec::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) s(idx[k]) = sp(static_cast<Eigen::Index>(k));
    return s;
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const Vec w = A.transpose() * (b - A * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_iterations; ++inner) {
      const Vec s = solve_passive();
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - s(j)));
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  return x.cwiseMax(0.0);
}

}  // namespace hsc
