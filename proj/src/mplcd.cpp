#include "sdsrl/mplcd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sdsrl {

namespace {

void check_index(const Matrix& factor, Index i, Index j) {
    if (i < 0 || i >= factor.rows() || j < 0 || j >= factor.cols())
        throw ShapeError("coordinate (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") outside factor of shape " + std::to_string(factor.rows()) + "x" +
                         std::to_string(factor.cols()));
}

void check_pass_shapes(const Matrix& m_sym, const Matrix& m_cross, const Matrix& factor,
                       const Matrix& fixed) {
    if (m_sym.rows() != m_sym.cols()) throw ShapeError("symmetric target must be square");
    if (m_sym.rows() != factor.rows())
        throw ShapeError("factor rows do not match symmetric target size");
    if (m_cross.rows() != factor.rows() || m_cross.cols() != fixed.rows())
        throw ShapeError("cross target shape does not match factor/fixed rows");
    if (factor.cols() != fixed.cols())
        throw ShapeError("factor and fixed differ in shared-space dimension");
    const double asym = (m_sym - m_sym.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * (1.0 + m_sym.cwiseAbs().maxCoeff()))
        throw DataError("symmetric target is materially asymmetric");
}

}  // namespace

void validate_solver_config(const SolverConfig& cfg) {
    if (cfg.q < 1) throw ConfigError("shared-space dimension must be at least 1");
    if (cfg.outer_loops < 1) throw ConfigError("need at least one outer loop");
    if (cfg.inner_iters < 1) throw ConfigError("need at least one inner sweep");
    if (!(cfg.tol > 0.0)) throw ConfigError("tolerance must be positive");
    if (!(cfg.hessian_floor > 0.0)) throw ConfigError("hessian floor must be positive");
}

double total_loss(const ProjectionPair& p, const LinkMatrices& links) {
    if (p.proj_img.rows() != links.intra_image.rows() ||
        p.proj_txt.rows() != links.intra_text.rows())
        throw ShapeError("projection rows do not match link matrix sizes");
    if (p.proj_img.cols() != p.proj_txt.cols())
        throw ShapeError("projections differ in shared-space dimension");
    if (links.cross.rows() != links.intra_image.rows() ||
        links.cross.cols() != links.intra_text.rows())
        throw ShapeError("cross link shape inconsistent with intra links");
    const double li = (links.intra_image - p.proj_img * p.proj_img.transpose()).squaredNorm();
    const double lt = (links.intra_text - p.proj_txt * p.proj_txt.transpose()).squaredNorm();
    const double lc = (links.cross - p.proj_img * p.proj_txt.transpose()).squaredNorm();
    return li + lt + lc;
}

ResidualState make_residuals(const Matrix& factor, const Matrix& fixed, const Matrix& m_sym,
                             const Matrix& m_cross) {
    check_pass_shapes(m_sym, m_cross, factor, fixed);
    ResidualState state;
    state.sym = -m_sym;
    state.sym.noalias() += factor * factor.transpose();
    state.cross = -m_cross;
    state.cross.noalias() += factor * fixed.transpose();
    return state;
}

double residual_loss(const ResidualState& state) {
    return state.sym.squaredNorm() + state.cross.squaredNorm();
}

std::pair<double, double> coordinate_derivatives(const ResidualState& state, const Matrix& factor,
                                                 const Matrix& fixed, Index i, Index j) {
    check_index(factor, i, j);
    // sym is symmetric, so its row i can be read as column i, which is
    // contiguous in memory
    const double g1 =
        4.0 * state.sym.col(i).dot(factor.col(j)) + 2.0 * state.cross.row(i).dot(fixed.col(j));
    const double g2 =
        4.0 * (factor.col(j).squaredNorm() + factor(i, j) * factor(i, j) + state.sym(i, i)) +
        2.0 * fixed.col(j).squaredNorm();
    return {g1, g2};
}

void apply_coordinate_update(ResidualState& state, Matrix& factor, const Matrix& fixed, Index i,
                             Index j, double d) {
    check_index(factor, i, j);
    if (d == 0.0) return;
    // Row/column updates use the pre-update column; the d^2 term completes the
    // diagonal, where the entry enters quadratically.
    const Index m = factor.rows();
    const double* column = factor.col(j).data();
    double* row_mirror = state.sym.data() + i;  // row i, stride = m
    for (Index k = 0; k < m; ++k) {
        // the stride defeats the hardware prefetcher, so hint the store target
        if (k + 8 < m) __builtin_prefetch(row_mirror + (k + 8) * m, 1);
        row_mirror[k * m] += d * column[k];
    }
    state.sym.col(i) += d * factor.col(j);
    state.sym(i, i) += d * d;
    state.cross.row(i) += d * fixed.col(j).transpose();
    factor(i, j) += d;
}

int mplcd_pass(const Matrix& m_sym, const Matrix& m_cross, Matrix& factor, const Matrix& fixed,
               const SolverConfig& cfg, std::mt19937_64& rng) {
    validate_solver_config(cfg);
    ResidualState state = make_residuals(factor, fixed, m_sym, m_cross);
    double prev_loss = residual_loss(state);
    if (!std::isfinite(prev_loss)) throw DivergenceError("non-finite loss before sweep 1");
    if (prev_loss == 0.0) return 0;  // exact fixed point

    const Index rows = factor.rows(), cols = factor.cols();
    std::vector<Index> order(static_cast<std::size_t>(rows * cols));
    std::iota(order.begin(), order.end(), Index{0});

    // Column squared norms feeding g2: the fixed factor's are constant, the
    // updated factor's are maintained incrementally across updates.
    Vector factor_sqnorm(cols), fixed_sqnorm(cols);
    for (Index j = 0; j < cols; ++j) {
        factor_sqnorm(j) = factor.col(j).squaredNorm();
        fixed_sqnorm(j) = fixed.col(j).squaredNorm();
    }

    int sweeps = 0;
    for (int t = 0; t < cfg.inner_iters; ++t) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Index flat : order) {
            const Index i = flat % rows;
            const Index j = flat / rows;
            const double entry = factor(i, j);
            const double g1 = 4.0 * state.sym.col(i).dot(factor.col(j)) +
                              2.0 * state.cross.row(i).dot(fixed.col(j));
            const double g2 = 4.0 * (factor_sqnorm(j) + entry * entry + state.sym(i, i)) +
                              2.0 * fixed_sqnorm(j);
            if (std::abs(g2) < cfg.hessian_floor * (1.0 + std::abs(g1))) continue;
            const double d = -g1 / g2;
            apply_coordinate_update(state, factor, fixed, i, j, d);
            factor_sqnorm(j) += d * (2.0 * entry + d);
        }
        ++sweeps;
        const double loss = residual_loss(state);
        if (!std::isfinite(loss))
            throw DivergenceError("non-finite loss after sweep " + std::to_string(sweeps));
        if (std::abs(loss - prev_loss) <= cfg.tol * prev_loss) return sweeps;
        prev_loss = loss;
        if (prev_loss == 0.0) return sweeps;
    }
    return sweeps;
}

SolveResult solve_joint(const LinkMatrices& links, const SolverConfig& cfg) {
    validate_solver_config(cfg);
    const Index m1 = links.intra_image.rows();
    const Index m2 = links.intra_text.rows();

    std::mt19937_64 rng(cfg.seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.q));
    std::uniform_real_distribution<double> init(-bound, bound);
    ProjectionPair p{Matrix(m1, cfg.q), Matrix(m2, cfg.q)};
    for (Index j = 0; j < cfg.q; ++j)
        for (Index i = 0; i < m1; ++i) p.proj_img(i, j) = init(rng);
    for (Index j = 0; j < cfg.q; ++j)
        for (Index i = 0; i < m2; ++i) p.proj_txt(i, j) = init(rng);

    const Matrix cross_t = links.cross.transpose();
    SolveResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(cfg.outer_loops) + 1);
    result.loss_trace.push_back(total_loss(p, links));
    for (int loop = 0; loop < cfg.outer_loops; ++loop) {
        mplcd_pass(links.intra_image, links.cross, p.proj_img, p.proj_txt, cfg, rng);
        mplcd_pass(links.intra_text, cross_t, p.proj_txt, p.proj_img, cfg, rng);
        result.loss_trace.push_back(total_loss(p, links));
    }
    result.projections = std::move(p);
    return result;
}

}  // namespace sdsrl
