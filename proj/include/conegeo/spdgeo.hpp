#pragma once

// Affine-invariant Riemannian geometry on the SPD cone.
//
// Tangent vectors U at X are handled in congruence-transformed coordinates
// S = X^{-1/2} U X^{-1/2}, in which the metric tr(X^{-1} U X^{-1} V) becomes
// the Frobenius product tr(S_U S_V) and Exp_X(U) = X^{1/2} exp(S) X^{1/2}.
//
// Lebesgue measure on the symmetric matrices is fixed by the orthonormal
// vectorization of to_coords() (diagonal entries as-is, off-diagonal entries
// scaled by sqrt(2)), so that |to_coords(A)|_2 = |A|_F.

#include "conegeo/symcore.hpp"

namespace conegeo {

/// Largest |S|_F accepted by exp_map before reporting StepTooLarge.
inline constexpr double kMaxTangentNorm = 50.0;

/// A base point X with X^{1/2} and X^{-1/2} precomputed.
class SpdFrame {
 public:
  explicit SpdFrame(SpdMatrix x);

  const SpdMatrix& point() const { return x_; }
  const SymMatrix& sqrt() const { return sqrt_; }
  const SymMatrix& invsqrt() const { return invsqrt_; }

  /// S = X^{-1/2} U X^{-1/2}
  SymMatrix to_tangent(const SymMatrix& u) const;
  /// U = X^{1/2} S X^{1/2}
  SymMatrix from_tangent(const SymMatrix& s) const;

 private:
  SpdMatrix x_;
  SymMatrix sqrt_;
  SymMatrix invsqrt_;
};

/// A tangent vector stored by its congruence-transformed coordinates.
struct TangentCoords {
  SpdFrame frame;
  SymMatrix s;

  static TangentCoords from_vector(SpdFrame frame, const SymMatrix& u) {
    SymMatrix s = frame.to_tangent(u);
    return TangentCoords{std::move(frame), std::move(s)};
  }
  SymMatrix vector() const { return frame.from_tangent(s); }
};

double ai_inner(const SpdMatrix& x, const SymMatrix& u, const SymMatrix& v);

SpdMatrix exp_map(const SpdFrame& x, const SymMatrix& s);
SpdMatrix exp_map(const SpdMatrix& x, const SymMatrix& s);

/// S = log(X^{-1/2} Y X^{-1/2}), so that exp_map(X, S) == Y.
SymMatrix log_map(const SpdFrame& x, const SpdMatrix& y);
SymMatrix log_map(const SpdMatrix& x, const SpdMatrix& y);

double ai_distance(const SpdFrame& x, const SpdMatrix& y);
double ai_distance(const SpdMatrix& x, const SpdMatrix& y);

/// log(sinh(x) / x), continuous at 0 and overflow-free for large |x|.
double log_sinhc(double x);

/// log j(S) = sum_{i<j} log(sinh(g_ij) / g_ij), g_ij = (s_i - s_j) / 2.
double exp_jacobian_log(const SymMatrix& s);
double exp_jacobian_log(const Eigen::VectorXd& eigenvalues);

/// Orthonormal vectorization: d diagonal entries, then sqrt(2) * A(i, j)
/// for i < j in row-major order.
Eigen::VectorXd to_coords(const SymMatrix& a);
SymMatrix from_coords(const Eigen::VectorXd& coords);
/// Matrix dimension d for a coordinate vector of length d(d+1)/2.
Index dim_from_coord_count(Index n);

}  // namespace conegeo
