#pragma once

#include "ncmac/types.hpp"

namespace ncmac {

bool all_finite(const CMatrix& a);
void require_finite(const CMatrix& a, const char* what);

// Hermitian part (A + A^H) / 2
CMatrix herm(const CMatrix& a);

// log det of a Hermitian positive definite matrix, via Cholesky
double logdet_pd(const CMatrix& a);

// A^p for Hermitian PD A; eigenvalues floored at `floor` before the power.
// Throws InvalidInput if the smallest eigenvalue is not positive.
CMatrix hermitian_power(const CMatrix& a, double p, double floor = 1e-12);

// Orthonormal factor of the polar decomposition of a full-column-rank matrix
CMatrix polar_factor(const CMatrix& a);

// Re tr(A^H B)
double real_inner(const CMatrix& a, const CMatrix& b);

}  // namespace ncmac
