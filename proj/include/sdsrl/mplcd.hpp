#pragma once

#include "sdsrl/common.hpp"
#include "sdsrl/semantics.hpp"

#include <random>
#include <utility>
#include <vector>

namespace sdsrl {

struct SolverConfig {
    Index q = 10;                  // shared-space dimension
    int outer_loops = 50;          // alternations between the two factors
    int inner_iters = 10;          // coordinate sweeps per factor update
    double tol = 1e-4;             // relative loss-change stop per sweep
    double hessian_floor = 1e-12;  // skip coordinates with |g2| below floor*(1+|g1|)
    std::uint64_t seed = 0;
};

void validate_solver_config(const SolverConfig& cfg);

struct ProjectionPair {
    Matrix proj_img;  // m1 x q
    Matrix proj_txt;  // m2 x q
};

// ||M_I - AA'||_F^2 + ||M_T - BB'||_F^2 + ||M_C - AB'||_F^2.
double total_loss(const ProjectionPair& p, const LinkMatrices& links);

// Residuals of one factor subproblem, maintained incrementally across
// coordinate updates: sym = FF' - M_sym, cross = FG' - M_cross.
struct ResidualState {
    Matrix sym;
    Matrix cross;
};

ResidualState make_residuals(const Matrix& factor, const Matrix& fixed, const Matrix& m_sym,
                             const Matrix& m_cross);

double residual_loss(const ResidualState& state);

// First and second derivative of the subproblem loss restricted to
// factor(i, j), read off the maintained residuals:
//   g1 = 4 sym(i,:) * factor(:,j) + 2 cross(i,:) * fixed(:,j)
//   g2 = 4 (||factor(:,j)||^2 + factor(i,j)^2 + sym(i,i)) + 2 ||fixed(:,j)||^2
std::pair<double, double> coordinate_derivatives(const ResidualState& state, const Matrix& factor,
                                                 const Matrix& fixed, Index i, Index j);

// factor(i, j) += d, updating sym on row i, column i and the (i, i) quadratic
// correction, and cross on row i. Residuals stay exact (to roundoff).
void apply_coordinate_update(ResidualState& state, Matrix& factor, const Matrix& fixed, Index i,
                             Index j, double d);

// One factor subproblem: up to cfg.inner_iters sweeps of Newton coordinate
// updates, each sweep visiting every coordinate of `factor` in a fresh random
// permutation. Stops early once the relative loss change per sweep is within
// cfg.tol. m_sym must be symmetric. Returns the number of sweeps executed.
int mplcd_pass(const Matrix& m_sym, const Matrix& m_cross, Matrix& factor, const Matrix& fixed,
               const SolverConfig& cfg, std::mt19937_64& rng);

struct SolveResult {
    ProjectionPair projections;
    std::vector<double> loss_trace;  // entry 0 at initialization, then one per outer loop
};

// Alternates the image-factor and text-factor subproblems for
// cfg.outer_loops rounds from a seeded uniform initialization in
// [-1/sqrt(q), 1/sqrt(q)]. Deterministic for a fixed config.
SolveResult solve_joint(const LinkMatrices& links, const SolverConfig& cfg);

}  // namespace sdsrl
