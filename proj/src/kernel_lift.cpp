#include "sdsrl/kernel_lift.hpp"

#include <cmath>
#include <string>

namespace sdsrl {

void validate_kernel(const KernelSpec& k) {
    if (k.kind != KernelKind::rbf) throw ConfigError("unsupported kernel kind");
    if (!(k.sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
}

double kernel_eval(const KernelSpec& k, const Vector& x, const Vector& y) {
    if (x.size() != y.size())
        throw ShapeError("kernel arguments differ in dimension: " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
    return std::exp(-k.sigma * (x - y).squaredNorm());
}

Matrix gram_matrix(const KernelSpec& k, const Matrix& a) {
    validate_kernel(k);
    const Index n = a.rows();
    Matrix g(n, n);
    parallel_rows(n, [&](Index lo, Index hi) {
        for (Index i = lo; i < hi; ++i)
            for (Index j = i; j < n; ++j)
                g(i, j) = std::exp(-k.sigma * (a.row(i) - a.row(j)).squaredNorm());
    });
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) g(j, i) = g(i, j);
    return g;
}

Matrix gram_matrix(const KernelSpec& k, const Matrix& a, const Matrix& b) {
    if (&a == &b) return gram_matrix(k, a);
    validate_kernel(k);
    if (a.cols() != b.cols())
        throw ShapeError("Gram operands differ in feature dimension: " + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()));
    Matrix g(a.rows(), b.rows());
    parallel_rows(a.rows(), [&](Index lo, Index hi) {
        for (Index i = lo; i < hi; ++i)
            for (Index j = 0; j < b.rows(); ++j)
                g(i, j) = std::exp(-k.sigma * (a.row(i) - b.row(j)).squaredNorm());
    });
    return g;
}

NystroemMap fit_nystroem(const KernelSpec& k, const Matrix& landmarks, Index r, double eig_floor) {
    validate_kernel(k);
    const Index m = landmarks.rows();
    if (m < 1) throw DataError("need at least one landmark");
    if (r < 1 || r > m)
        throw ConfigError("rank must satisfy 1 <= r <= landmark count, got r=" + std::to_string(r) +
                          " with " + std::to_string(m) + " landmarks");
    if (eig_floor < 0.0) throw ConfigError("eigenvalue floor must be non-negative");
    if (!landmarks.allFinite()) throw DataError("non-finite landmark feature");

    Matrix gram = gram_matrix(k, landmarks);
    gram = 0.5 * (gram + gram.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericError("landmark Gram eigendecomposition failed");
    const Vector& values = eig.eigenvalues();  // ascending
    const double largest = values(m - 1);
    if (largest <= 0.0) throw NumericError("landmark Gram has no positive eigenvalue");
    const double floor_abs = eig_floor * largest;

    Index kept = 0;
    while (kept < r && values(m - 1 - kept) > floor_abs) ++kept;
    if (kept == 0)
        throw NumericError("all eigenvalues at or below the floor; landmark kernel is degenerate");

    NystroemMap map;
    map.landmarks = landmarks;
    map.kernel = k;
    map.scaling = Matrix(kept, m);
    for (Index l = 0; l < kept; ++l) {
        const Index src = m - 1 - l;  // descending eigenvalue order
        Vector v = eig.eigenvectors().col(src);
        // canonical sign: largest-magnitude component positive
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        map.scaling.row(l) = v.transpose() / std::sqrt(values(src));
    }
    return map;
}

Matrix transform(const NystroemMap& map, const Matrix& x) {
    if (x.cols() != map.landmarks.cols())
        throw ShapeError("input feature dimension " + std::to_string(x.cols()) +
                         " does not match landmark dimension " +
                         std::to_string(map.landmarks.cols()));
    const Index m = map.landmarks.rows();
    Matrix out(x.rows(), map.out_dim());
    // row at a time: each output row depends only on its input row, so the
    // result is bit-identical however the rows are batched or scheduled
    parallel_rows(x.rows(), [&](Index lo, Index hi) {
        Vector responses(m);
        for (Index i = lo; i < hi; ++i) {
            for (Index j = 0; j < m; ++j)
                responses(j) =
                    std::exp(-map.kernel.sigma * (x.row(i) - map.landmarks.row(j)).squaredNorm());
            out.row(i) = (map.scaling * responses).transpose();
        }
    });
    return out;
}

}  // namespace sdsrl
