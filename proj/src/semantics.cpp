#include "sdsrl/semantics.hpp"

#include "sdsrl/dataio.hpp"

#include <algorithm>
#include <string>

namespace sdsrl {

Matrix semantic_correlation(const Matrix& la, const Matrix& lb, Index block_rows) {
    if (la.cols() != lb.cols())
        throw ShapeError("concept counts differ: " + std::to_string(la.cols()) + " vs " +
                         std::to_string(lb.cols()));
    if (block_rows < 1) throw ConfigError("block size must be positive");
    validate_labels(la, "left labels");
    validate_labels(lb, "right labels");

    const Index na = la.rows(), nb = lb.rows(), c = la.cols();
    Matrix s(na, nb);
    for (Index block = 0; block < na; block += block_rows) {
        const Index block_end = std::min(na, block + block_rows);
        parallel_rows(block_end - block, [&, block](Index lo, Index hi) {
            for (Index a = block + lo; a < block + hi; ++a)
                for (Index b = 0; b < nb; ++b) {
                    double sum = 0.0;
                    for (Index j = 0; j < c; ++j) {
                        const double va = la(a, j), vb = lb(b, j);
                        const double den = va + vb;
                        if (den != 0.0) sum += 2.0 * va * vb / den;
                    }
                    s(a, b) = sum;
                }
        });
    }
    return s;
}

Matrix link_matrix(const Matrix& phi, const Matrix& s, const Matrix& psi, double mu) {
    if (phi.rows() != s.rows())
        throw ShapeError("left features have " + std::to_string(phi.rows()) +
                         " rows but correlation has " + std::to_string(s.rows()));
    if (psi.rows() != s.cols())
        throw ShapeError("right features have " + std::to_string(psi.rows()) +
                         " rows but correlation has " + std::to_string(s.cols()) + " columns");
    if (!(mu > 0.0)) throw ConfigError("regularizer mu must be positive");

    const bool intra = (&phi == &psi) || (phi.rows() == psi.rows() && phi.cols() == psi.cols() &&
                                          (phi.array() == psi.array()).all());

    Matrix gram_left = phi.transpose() * phi;
    gram_left.diagonal().array() += mu;
    Eigen::LLT<Matrix> left(gram_left);
    if (left.info() != Eigen::Success) throw NumericError("left Gram factorization failed");

    Matrix m = left.solve(phi.transpose() * s * psi);
    if (intra) {
        m = left.solve(m.transpose()).transpose();
        m = 0.5 * (m + m.transpose()).eval();  // eval: transpose aliases m
    } else {
        Matrix gram_right = psi.transpose() * psi;
        gram_right.diagonal().array() += mu;
        Eigen::LLT<Matrix> right(gram_right);
        if (right.info() != Eigen::Success) throw NumericError("right Gram factorization failed");
        m = right.solve(m.transpose()).transpose();
    }
    if (!m.allFinite()) throw NumericError("link matrix solve produced non-finite values");
    return m;
}

LinkMatrices build_all_links(const Matrix& phi, const Matrix& psi, const Matrix& labels_img,
                             const Matrix& labels_txt, double mu) {
    if (phi.rows() != labels_img.rows())
        throw ShapeError("image features/labels row mismatch in link construction");
    if (psi.rows() != labels_txt.rows())
        throw ShapeError("text features/labels row mismatch in link construction");

    LinkMatrices links;
    links.mu = mu;
    links.intra_image = link_matrix(phi, semantic_correlation(labels_img, labels_img), phi, mu);
    links.intra_text = link_matrix(psi, semantic_correlation(labels_txt, labels_txt), psi, mu);
    links.cross = link_matrix(phi, semantic_correlation(labels_img, labels_txt), psi, mu);
    return links;
}

}  // namespace sdsrl
