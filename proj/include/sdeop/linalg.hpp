#pragma once

#include <cstdint>
#include <vector>

namespace sdeop::linalg {

// Dense symmetric eigendecomposition (cyclic Jacobi). Row-major input,
// eigenvalues descending, eigenvectors returned as columns of `vectors`
// (vectors[i*n + k] is component i of eigenvector k). Desk-scale sizes only.
struct SymEigen {
  int n = 0;
  std::vector<double> values;
  std::vector<double> vectors;
};
SymEigen sym_eigen(std::vector<double> a, int n);

// In-place lower Cholesky of a row-major SPD matrix; strict upper part is
// zeroed. Returns false if a non-positive pivot is hit.
bool cholesky_in_place(std::vector<double>& a, int n);

// Tridiagonal solve (Thomas). diag/lower/upper are the three bands,
// lower[0] and upper[n-1] unused.
std::vector<double> tridiag_solve(std::vector<double> lower, std::vector<double> diag,
                                  std::vector<double> upper, std::vector<double> rhs);

// C = A*B with A [n x k], B [k x m], all row-major.
void matmul(const double* a, const double* b, double* c, std::int64_t n, std::int64_t k,
            std::int64_t m);

}  // namespace sdeop::linalg
