#pragma once

#include "sdsrl/common.hpp"

namespace sdsrl {

enum class KernelKind { rbf };

// RBF: k(x, y) = exp(-sigma * ||x - y||^2).
struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double sigma = 1.0;
};

void validate_kernel(const KernelSpec& k);

double kernel_eval(const KernelSpec& k, const Vector& x, const Vector& y);

// Symmetric Gram of one set; each unordered pair evaluated exactly once, so
// the result is bitwise symmetric.
Matrix gram_matrix(const KernelSpec& k, const Matrix& a);

// Cross Gram, entry (i, j) = k(a_i, b_j). Rows computed independently and may
// run in parallel.
Matrix gram_matrix(const KernelSpec& k, const Matrix& a, const Matrix& b);

// Finite-dimensional feature map fitted on landmark points: inner products of
// transformed vectors approximate the kernel, exactly so at full rank.
struct NystroemMap {
    Matrix landmarks;   // M x d
    KernelSpec kernel;
    Matrix scaling;     // out_dim x M, rows ordered by descending eigenvalue
    Index out_dim() const { return scaling.rows(); }
};

// Eigendecomposes the landmark Gram and keeps the top eigenpairs: at most r,
// and only those above eig_floor relative to the largest eigenvalue (the map
// inverts eigenvalues, so near-null directions would amplify noise). The
// retained count is the map's out_dim and may be smaller than r.
NystroemMap fit_nystroem(const KernelSpec& k, const Matrix& landmarks, Index r,
                         double eig_floor = 1e-10);

// Lifts each row of x: z(x_i) = scaling * [k(x_i, l_1), ..., k(x_i, l_M)]'.
Matrix transform(const NystroemMap& map, const Matrix& x);

}  // namespace sdsrl
