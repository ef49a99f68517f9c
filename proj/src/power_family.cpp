#include "hsc/power_family.hpp"

#include <algorithm>
#include <cmath>

namespace hsc {

namespace {

Vec pos(const Vec& v) { return v.cwiseMax(0.0); }
Vec neg(const Vec& v) { return (-v).cwiseMax(0.0); }

void check_shape(const Mat& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (a.rows() != rows || a.cols() != cols)
    throw DimensionMismatch(std::string("power family: ") + name + " has shape " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
}

bool closed_form_cell(const PowerCell& c) {
  if (c.b_pos != c.b_neg) return false;
  if (!c.d_pos.isZero(0.0) || !c.d_neg.isZero(0.0)) return false;
  if (c.q_mix != 0.0 && !c.r_mix.isZero(0.0)) return false;
  const Mat M = c.r.transpose() * c.r;
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  return es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
}

}  // namespace

PowerCell PowerCell::zeros(int m, int n) {
  PowerCell c;
  c.b_pos = c.b_neg = Vec::Zero(m);
  c.c_pos = c.c_neg = Vec::Zero(n);
  c.d_pos = c.d_neg = Mat::Zero(n, m);
  c.r = Mat::Zero(1, m);
  c.r_mix = Mat::Zero(1, m);
  return c;
}

PowerFamily::PowerFamily(double p, double T, int m, int n, std::vector<PowerCell> cells)
    : p_(p), T_(T), m_(m), n_(n), cells_(std::move(cells)) {
  if (cells_.empty()) throw DomainError("power family: at least one time cell is required");
  for (const auto& c : cells_) {
    check_shape(c.b_pos, m, 1, "b_pos");
    check_shape(c.b_neg, m, 1, "b_neg");
    check_shape(c.c_pos, n, 1, "c_pos");
    check_shape(c.c_neg, n, 1, "c_neg");
    check_shape(c.d_pos, n, m, "d_pos");
    check_shape(c.d_neg, n, m, "d_neg");
    check_shape(c.r, c.r.rows(), m, "r");
    check_shape(c.r_mix, c.r_mix.rows(), m, "r_mix");
    if (c.r.rows() < 1 || c.r_mix.rows() < 1) throw DimensionMismatch("power family: r and r_mix need >= 1 row");
    closed_form_.push_back(closed_form_cell(c));
  }
}

int PowerFamily::cell_index(double cell_t) const {
  const int K = static_cast<int>(cells_.size());
  if (K == 1) return 0;
  const int k = static_cast<int>(std::floor(cell_t / T_ * K));
  return std::clamp(k, 0, K - 1);
}

double PowerFamily::drift(Branch side, const PowerCell& c, const Vec& v) const {
  const double state = side == Branch::plus ? c.a_pos : -c.a_neg;
  return state + c.b_pos.dot(pos(v)) - c.b_neg.dot(neg(v));
}

Vec PowerFamily::volatility(Branch side, const PowerCell& c, const Vec& v) const {
  Vec s = side == Branch::plus ? Vec(c.c_pos) : Vec(-c.c_neg);
  s += c.d_pos * pos(v) - c.d_neg * neg(v);
  return s;
}

double PowerFamily::running_cost(const PowerCell& c, const Vec& v) const {
  double f = std::pow(std::abs(c.q), p_) + std::pow((c.r * v).norm(), p_);
  if (c.q_mix != 0.0) f += std::pow(std::abs(c.q_mix), p_ / 3.0) * std::pow((c.r_mix * v).norm(), 2.0 * p_ / 3.0);
  return f;
}

double PowerFamily::running_cost_at_origin(const PowerCell& c, const Vec& v) const {
  return std::pow((c.r * v).norm(), p_);
}

double PowerFamily::drift_full(double t, double x, const Vec& u) const {
  const auto& c = cell(t);
  return c.a_pos * std::max(x, 0.0) - c.a_neg * std::max(-x, 0.0) + c.b_pos.dot(pos(u)) - c.b_neg.dot(neg(u));
}

Vec PowerFamily::volatility_full(double t, double x, const Vec& u) const {
  const auto& c = cell(t);
  return c.c_pos * std::max(x, 0.0) - c.c_neg * std::max(-x, 0.0) + c.d_pos * pos(u) - c.d_neg * neg(u);
}

double PowerFamily::cost_full(double t, double x, const Vec& u) const {
  const auto& c = cell(t);
  return std::pow(std::abs(c.q * x), p_) + std::pow((c.r * u).norm(), p_) +
         std::pow(std::abs(c.q_mix * x), p_ / 3.0) * std::pow((c.r_mix * u).norm(), 2.0 * p_ / 3.0);
}

}  // namespace hsc
