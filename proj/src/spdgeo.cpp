#include "conegeo/spdgeo.hpp"

#include <cmath>
#include <numbers>

namespace conegeo {

namespace {

struct Roots {
  SymMatrix sqrt;
  SymMatrix invsqrt;
};

Roots roots_of(const SpdMatrix& x) {
  const EigenDecomp eig = eigh(x.sym());
  return Roots{sym_func(eig, MatrixFunction::sqrt), sym_func(eig, MatrixFunction::invsqrt)};
}

}  // namespace

SpdFrame::SpdFrame(SpdMatrix x) : x_(std::move(x)) {
  Roots r = roots_of(x_);
  sqrt_ = std::move(r.sqrt);
  invsqrt_ = std::move(r.invsqrt);
}

SymMatrix SpdFrame::to_tangent(const SymMatrix& u) const {
  return congruence(invsqrt_.matrix(), u);
}

SymMatrix SpdFrame::from_tangent(const SymMatrix& s) const {
  return congruence(sqrt_.matrix(), s);
}

double ai_inner(const SpdMatrix& x, const SymMatrix& u, const SymMatrix& v) {
  const Eigen::MatrixXd a = x.whiten(u);
  const Eigen::MatrixXd b = x.whiten(v);
  return a.cwiseProduct(b).sum();
}

SpdMatrix exp_map(const SpdFrame& x, const SymMatrix& s) {
  if (s.dim() != x.point().dim()) throw InvalidInput("exp_map: dimension mismatch");
  if (!s.all_finite() || s.frobenius_norm() > kMaxTangentNorm) {
    throw StepTooLarge("exp_map: tangent increment too large");
  }
  return SpdMatrix(x.from_tangent(sym_func(s, MatrixFunction::exp)));
}

SpdMatrix exp_map(const SpdMatrix& x, const SymMatrix& s) { return exp_map(SpdFrame(x), s); }

SymMatrix log_map(const SpdFrame& x, const SpdMatrix& y) {
  if (y.dim() != x.point().dim()) throw InvalidInput("log_map: dimension mismatch");
  return sym_func(x.to_tangent(y.sym()), MatrixFunction::log);
}

SymMatrix log_map(const SpdMatrix& x, const SpdMatrix& y) { return log_map(SpdFrame(x), y); }

double ai_distance(const SpdFrame& x, const SpdMatrix& y) {
  if (y.dim() != x.point().dim()) throw InvalidInput("ai_distance: dimension mismatch");
  const EigenDecomp eig = eigh(x.to_tangent(y.sym()));
  if (!(eig.values(0) > 0.0)) throw NotPositiveDefinite("ai_distance: relative matrix not PD");
  return eig.values.array().log().matrix().norm();
}

double ai_distance(const SpdMatrix& x, const SpdMatrix& y) { return ai_distance(SpdFrame(x), y); }

double log_sinhc(double x) {
  const double a = std::abs(x);
  if (a < 0.5) {
    // sinh(a)/a - 1 = sum_k a^{2k} / (2k+1)!, truncated after the a^12 term.
    const double a2 = a * a;
    double term = 1.0;
    double t = 0.0;
    for (int k = 1; k <= 6; ++k) {
      term *= a2 / ((2.0 * k) * (2.0 * k + 1.0));
      t += term;
    }
    return std::log1p(t);
  }
  if (a > 1.0) {
    // sinh a = e^a (1 - e^{-2a}) / 2
    return a + std::log1p(-std::exp(-2.0 * a)) - std::numbers::ln2 - std::log(a);
  }
  return std::log(std::sinh(a) / a);
}

double exp_jacobian_log(const Eigen::VectorXd& eigenvalues) {
  double total = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    for (Index j = i + 1; j < eigenvalues.size(); ++j) {
      total += log_sinhc(0.5 * (eigenvalues(i) - eigenvalues(j)));
    }
  }
  return total;
}

double exp_jacobian_log(const SymMatrix& s) { return exp_jacobian_log(eigh(s).values); }

Eigen::VectorXd to_coords(const SymMatrix& a) {
  const Index d = a.dim();
  Eigen::VectorXd out(d * (d + 1) / 2);
  Index k = 0;
  for (Index i = 0; i < d; ++i) out(k++) = a(i, i);
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) out(k++) = std::numbers::sqrt2 * a(i, j);
  }
  return out;
}

Index dim_from_coord_count(Index n) {
  Index d = 0;
  while (d * (d + 1) / 2 < n) ++d;
  if (d * (d + 1) / 2 != n || d < 1) throw InvalidInput("coordinate count is not a triangular number");
  return d;
}

SymMatrix from_coords(const Eigen::VectorXd& coords) {
  const Index d = dim_from_coord_count(coords.size());
  Eigen::MatrixXd a(d, d);
  Index k = 0;
  for (Index i = 0; i < d; ++i) a(i, i) = coords(k++);
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      a(i, j) = coords(k++) / std::numbers::sqrt2;
      a(j, i) = a(i, j);
    }
  }
  return SymMatrix(a);
}

}  // namespace conegeo
