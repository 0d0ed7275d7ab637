#include "ncmac/linalg.hpp"

#include <cmath>
#include <string>

#include "ncmac/errors.hpp"

namespace ncmac {

bool all_finite(const CMatrix& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const cd v = a.data()[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

void require_finite(const CMatrix& a, const char* what) {
  if (!all_finite(a)) throw InvalidInput(std::string(what) + " has non-finite entries");
}

CMatrix herm(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

double logdet_pd(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success) throw InvalidInput("matrix is not positive definite");
  const CMatrix& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

CMatrix hermitian_power(const CMatrix& a, double p, double floor) {
  require_finite(a, "correlation matrix");
  if (a.rows() != a.cols()) throw DimensionMismatch("correlation matrix must be square");
  if ((a - a.adjoint()).norm() > 1e-9 * std::max(1.0, a.norm()))
    throw InvalidInput("correlation matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm(a));
  RVector ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) throw InvalidInput("correlation matrix is not positive definite");
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::pow(std::max(ev(i), floor), p);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix polar_factor(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0)))
    throw InvalidInput("matrix is rank deficient");
  return svd.matrixU() * svd.matrixV().adjoint();
}

double real_inner(const CMatrix& a, const CMatrix& b) {
  return (a.array().conjugate() * b.array()).real().sum();
}

}  // namespace ncmac
