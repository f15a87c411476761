#pragma once

// Dense symmetric / SPD linear algebra shared by every other module.

#include <Eigen/Dense>

#include "conegeo/error.hpp"

namespace conegeo {

using Index = Eigen::Index;

/// Dense real symmetric matrix. Every constructor symmetrizes its input as
/// (A + A^T) / 2, so entries(i, j) == entries(j, i) holds bit-exactly.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& a);

  static SymMatrix zero(Index n);
  static SymMatrix identity(Index n);
  static SymMatrix diagonal(const Eigen::VectorXd& diag);

  Index dim() const { return a_.rows(); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  double operator()(Index i, Index j) const { return a_(i, j); }

  double trace() const { return a_.trace(); }
  double frobenius_norm() const { return a_.norm(); }
  bool all_finite() const { return a_.allFinite(); }

  SymMatrix operator+(const SymMatrix& other) const;
  SymMatrix operator-(const SymMatrix& other) const;
  SymMatrix operator-() const;
  SymMatrix operator*(double s) const;
  friend SymMatrix operator*(double s, const SymMatrix& a) { return a * s; }

 private:
  Eigen::MatrixXd a_;
};

/// Symmetric positive definite matrix with its Cholesky factor and
/// log-determinant computed once at construction.
class SpdMatrix {
 public:
  /// Throws NotPositiveDefinite when the Cholesky factorization fails.
  explicit SpdMatrix(SymMatrix a);
  explicit SpdMatrix(const Eigen::MatrixXd& a) : SpdMatrix(SymMatrix(a)) {}

  static SpdMatrix identity(Index n) { return SpdMatrix(SymMatrix::identity(n)); }

  Index dim() const { return a_.dim(); }
  const SymMatrix& sym() const { return a_; }
  const Eigen::MatrixXd& matrix() const { return a_.matrix(); }

  /// Lower-triangular L with L L^T = A.
  Eigen::MatrixXd cholesky_factor() const { return llt_.matrixL(); }
  double logdet() const { return logdet_; }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  Eigen::MatrixXd inverse() const;
  /// L^{-1} D L^{-T}; its Frobenius geometry equals tr(A^{-1} D A^{-1} D).
  Eigen::MatrixXd whiten(const SymMatrix& d) const;

 private:
  SymMatrix a_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double logdet_ = 0.0;
};

struct EigenDecomp {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns

  SymMatrix reconstruct() const;
};

enum class MatrixFunction { exp, log, sqrt, invsqrt };

EigenDecomp eigh(const SymMatrix& a);

SymMatrix sym_func(const SymMatrix& a, MatrixFunction f);
SymMatrix sym_func(const EigenDecomp& eig, MatrixFunction f);

double logdet(const SpdMatrix& a);
Eigen::MatrixXd solve_spd(const SpdMatrix& a, const Eigen::MatrixXd& b);

/// Symmetrized congruence C S C^T.
SymMatrix congruence(const Eigen::MatrixXd& c, const SymMatrix& s);

/// tr(A B) for symmetric A, B.
double frobenius_inner(const SymMatrix& a, const SymMatrix& b);

double min_eigenvalue(const SymMatrix& a);

}  // namespace conegeo
