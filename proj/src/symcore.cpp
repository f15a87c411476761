#include "conegeo/symcore.hpp"

#include <cmath>
#include <string>

namespace conegeo {

SymMatrix::SymMatrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw InvalidInput("SymMatrix: expected a non-empty square matrix, got " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  a_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::zero(Index n) { return SymMatrix(Eigen::MatrixXd::Zero(n, n)); }

SymMatrix SymMatrix::identity(Index n) { return SymMatrix(Eigen::MatrixXd::Identity(n, n)); }

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& diag) {
  return SymMatrix(Eigen::MatrixXd(diag.asDiagonal()));
}

SymMatrix SymMatrix::operator+(const SymMatrix& other) const {
  if (other.dim() != dim()) throw InvalidInput("SymMatrix +: dimension mismatch");
  return SymMatrix(a_ + other.a_);
}

SymMatrix SymMatrix::operator-(const SymMatrix& other) const {
  if (other.dim() != dim()) throw InvalidInput("SymMatrix -: dimension mismatch");
  return SymMatrix(a_ - other.a_);
}

SymMatrix SymMatrix::operator-() const { return SymMatrix(-a_); }

SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(s * a_); }

SpdMatrix::SpdMatrix(SymMatrix a) : a_(std::move(a)) {
  if (!a_.all_finite()) throw NotPositiveDefinite("SpdMatrix: non-finite entries");
  llt_.compute(a_.matrix());
  if (llt_.info() != Eigen::Success) {
    throw NotPositiveDefinite("SpdMatrix: Cholesky factorization failed");
  }
  const auto& l = llt_.matrixLLT();
  double sum = 0.0;
  for (Index i = 0; i < l.rows(); ++i) {
    const double pivot = l(i, i);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw NotPositiveDefinite("SpdMatrix: non-positive Cholesky pivot");
    }
    sum += std::log(pivot);
  }
  logdet_ = 2.0 * sum;
}

Eigen::MatrixXd SpdMatrix::solve(const Eigen::MatrixXd& b) const {
  if (b.rows() != dim()) throw InvalidInput("SpdMatrix::solve: row count mismatch");
  return llt_.solve(b);
}

Eigen::MatrixXd SpdMatrix::inverse() const {
  Eigen::MatrixXd inv = llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
  return 0.5 * (inv + inv.transpose());
}

Eigen::MatrixXd SpdMatrix::whiten(const SymMatrix& d) const {
  if (d.dim() != dim()) throw InvalidInput("SpdMatrix::whiten: dimension mismatch");
  const auto l = llt_.matrixL();
  Eigen::MatrixXd left = l.solve(d.matrix());
  Eigen::MatrixXd both = l.solve(left.transpose());
  return 0.5 * (both + both.transpose());
}

SymMatrix EigenDecomp::reconstruct() const {
  return SymMatrix(vectors * values.asDiagonal() * vectors.transpose());
}

EigenDecomp eigh(const SymMatrix& a) {
  if (!a.all_finite()) throw InvalidInput("eigh: non-finite input");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.matrix());
  if (solver.info() != Eigen::Success) throw InvalidInput("eigh: eigensolver did not converge");
  return EigenDecomp{solver.eigenvalues(), solver.eigenvectors()};
}

SymMatrix sym_func(const EigenDecomp& eig, MatrixFunction f) {
  Eigen::VectorXd mapped(eig.values.size());
  if (f != MatrixFunction::exp && !(eig.values.size() > 0 && eig.values(0) > 0.0)) {
    throw NotPositiveDefinite("sym_func: log/sqrt/invsqrt need a positive definite argument");
  }
  for (Index i = 0; i < eig.values.size(); ++i) {
    const double v = eig.values(i);
    switch (f) {
      case MatrixFunction::exp: mapped(i) = std::exp(v); break;
      case MatrixFunction::log: mapped(i) = std::log(v); break;
      case MatrixFunction::sqrt: mapped(i) = std::sqrt(v); break;
      case MatrixFunction::invsqrt: mapped(i) = 1.0 / std::sqrt(v); break;
    }
  }
  return SymMatrix(eig.vectors * mapped.asDiagonal() * eig.vectors.transpose());
}

SymMatrix sym_func(const SymMatrix& a, MatrixFunction f) { return sym_func(eigh(a), f); }

double logdet(const SpdMatrix& a) { return a.logdet(); }

Eigen::MatrixXd solve_spd(const SpdMatrix& a, const Eigen::MatrixXd& b) { return a.solve(b); }

SymMatrix congruence(const Eigen::MatrixXd& c, const SymMatrix& s) {
  if (c.cols() != s.dim()) throw InvalidInput("congruence: dimension mismatch");
  return SymMatrix(c * s.matrix() * c.transpose());
}

double frobenius_inner(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("frobenius_inner: dimension mismatch");
  return a.matrix().cwiseProduct(b.matrix()).sum();
}

double min_eigenvalue(const SymMatrix& a) {
  if (!a.all_finite()) throw InvalidInput("min_eigenvalue: non-finite input");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.matrix(), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

}  // namespace conegeo
