#pragma once

#include "sdsrl/common.hpp"

namespace sdsrl {

// Supervised correlation between two label sets:
//   S(a, b) = sum_j 2 * La(a,j) * Lb(b,j) / (La(a,j) + Lb(b,j)),  0/0 -> 0.
// For binary labels this is the shared-label count. Rows are processed in
// blocks of block_rows to keep large corpora cache-friendly.
Matrix semantic_correlation(const Matrix& la, const Matrix& lb, Index block_rows = 512);

// Ridge-regularized bilinear fit of S by lifted features:
//   (Phi'Phi + mu I)^-1 Phi' S Psi (Psi'Psi + mu I)^-1
// computed with SPD factorizations, never explicit inverses. When Phi and Psi
// are the same matrix the result is symmetrized to machine precision.
Matrix link_matrix(const Matrix& phi, const Matrix& s, const Matrix& psi, double mu);

// The three semantic-link weight matrices tying lifted features to label
// correlations: two intra-modal (symmetric) and one cross-modal.
struct LinkMatrices {
    Matrix intra_image;  // m1 x m1
    Matrix intra_text;   // m2 x m2
    Matrix cross;        // m1 x m2
    double mu = 1e-2;
};

LinkMatrices build_all_links(const Matrix& phi, const Matrix& psi, const Matrix& labels_img,
                             const Matrix& labels_txt, double mu);

}  // namespace sdsrl
