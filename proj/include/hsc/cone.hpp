#pragma once

#include "hsc/types.hpp"

#include <random>
#include <variant>
#include <vector>

namespace hsc {

/// Closed convex cone of admissible control values.
///
/// Four finite representations are supported: the whole space, the
/// nonnegative orthant, a single ray {l d : l >= 0}, and the cone generated by
/// the columns of a matrix {D l : l >= 0}.
class Cone {
 public:
  struct FullSpace {
    int m;
  };
  struct NonnegativeOrthant {
    int m;
  };
  struct SingleRay {
    Vec direction;
  };
  struct FinitelyGenerated {
    Mat generators;  // m x k, one generator per column
  };
  using Variant = std::variant<FullSpace, NonnegativeOrthant, SingleRay, FinitelyGenerated>;

  static Cone full_space(int m);
  static Cone orthant(int m);
  static Cone ray(Vec direction);
  static Cone generated(Mat generators);

  int dim() const { return m_; }
  const Variant& variant() const { return rep_; }
  bool is_full_space() const { return std::holds_alternative<FullSpace>(rep_); }
  /// True when v in cone implies -v in cone.
  bool is_symmetric() const;
  std::string kind() const;

  /// distance(v, cone) <= tol. Throws DimensionMismatch.
  bool contains(const Vec& v, double tol = 0.0) const;
  /// Euclidean projection onto the cone.
  Vec project(const Vec& v) const;
  double distance(const Vec& v) const { return (project(v) - v).norm(); }

  /// Generators spanning the cone as a nonnegative hull (full space yields +/- e_i).
  std::vector<Vec> spanning_directions() const;

  /// Random cone element: Gaussian sample projected onto the cone.
  template <class Rng>
  Vec sample(Rng& rng, double scale = 1.0) const {
    std::normal_distribution<double> nd;
    Vec v(m_);
    for (int i = 0; i < m_; ++i) v(i) = scale * nd(rng);
    Vec w = project(v);
    if (w.norm() == 0.0) {
      auto dirs = spanning_directions();
      std::uniform_int_distribution<std::size_t> pick(0, dirs.size() - 1);
      w = scale * dirs[pick(rng)].normalized();
    }
    return w;
  }

 private:
  Cone(Variant rep, int m) : rep_(std::move(rep)), m_(m) {}
  Variant rep_;
  int m_;
};

/// Nonnegative least squares min_{l >= 0} |A l - b| (Lawson-Hanson active set).
Vec nnls(const Mat& A, const Vec& b, int max_iterations = 0);

}  // namespace hsc
