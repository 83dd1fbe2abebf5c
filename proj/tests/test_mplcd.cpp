#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdsrl/mplcd.hpp"

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace sdsrl;

namespace {

LinkMatrices planted_links(Index m1, Index m2, Index q, std::mt19937_64& rng) {
    const Matrix a = oracles::random_matrix(m1, q, rng);
    const Matrix b = oracles::random_matrix(m2, q, rng);
    LinkMatrices links;
    links.intra_image = a * a.transpose();
    links.intra_text = b * b.transpose();
    links.cross = a * b.transpose();
    return links;
}

SolverConfig config(Index q) {
    SolverConfig cfg;
    cfg.q = q;
    return cfg;
}

}  // namespace

TEST_CASE("total_loss on zero factors and exact factorizations") {
    std::mt19937_64 rng(1);
    LinkMatrices links = planted_links(6, 5, 2, rng);
    ProjectionPair zero{Matrix::Zero(6, 2), Matrix::Zero(5, 2)};
    const double expected = links.intra_image.squaredNorm() + links.intra_text.squaredNorm() +
                            links.cross.squaredNorm();
    CHECK(total_loss(zero, links) == doctest::Approx(expected).epsilon(1e-15));

    const Matrix a = oracles::random_matrix(6, 2, rng);
    const Matrix b = oracles::random_matrix(5, 2, rng);
    links.intra_image = a * a.transpose();
    links.intra_text = b * b.transpose();
    links.cross = a * b.transpose();
    CHECK(total_loss({a, b}, links) == 0.0);
}

TEST_CASE("total_loss matches the brute-force summation oracle") {
    std::mt19937_64 rng(2);
    const Matrix a = oracles::random_matrix(4, 2, rng);
    const Matrix b = oracles::random_matrix(3, 2, rng);
    const LinkMatrices links = planted_links(4, 3, 2, rng);
    const double brute = oracles::total_loss_bruteforce(a, b, links.intra_image, links.intra_text,
                                                        links.cross);
    CHECK(total_loss({a, b}, links) == doctest::Approx(brute).epsilon(1e-13));

    ProjectionPair bad{oracles::random_matrix(5, 2, rng), b};
    CHECK_THROWS_AS(total_loss(bad, links), ShapeError);
}

TEST_CASE("coordinate derivatives on 1x1 hand instances") {
    // a=1, b=1, m_sym=1, m_cross=1: both residuals vanish, so g1 = 0
    Matrix a(1, 1), b(1, 1), m_sym(1, 1), m_cross(1, 1);
    a << 1.0; b << 1.0; m_sym << 1.0; m_cross << 1.0;
    ResidualState state = make_residuals(a, b, m_sym, m_cross);
    auto [g1, g2] = coordinate_derivatives(state, a, b, 0, 0);
    CHECK(g1 == 0.0);

    // a=1, b=0, m_sym=0, m_cross=0: g1 = 4, g2 = 12, Newton step -1/3
    b << 0.0; m_sym << 0.0; m_cross << 0.0;
    state = make_residuals(a, b, m_sym, m_cross);
    std::tie(g1, g2) = coordinate_derivatives(state, a, b, 0, 0);
    CHECK(g1 == 4.0);
    CHECK(g2 == 12.0);
    CHECK(-g1 / g2 == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(coordinate_derivatives(state, a, b, 1, 0), ShapeError);
    CHECK_THROWS_AS(coordinate_derivatives(state, a, b, 0, 2), ShapeError);
}

TEST_CASE("coordinate derivatives match central finite differences") {
    std::mt19937_64 rng(3);
    const Index m1 = 5, m2 = 4, q = 3;
    Matrix factor = oracles::random_matrix(m1, q, rng);
    const Matrix fixed = oracles::random_matrix(m2, q, rng);
    const Matrix sym_target = planted_links(m1, m2, q, rng).intra_image;
    const Matrix cross_target = oracles::random_matrix(m1, m2, rng);

    const ResidualState state = make_residuals(factor, fixed, sym_target, cross_target);
    std::uniform_int_distribution<Index> pick_i(0, m1 - 1), pick_j(0, q - 1);
    const double h1 = 1e-5, h2 = 1e-3;
    for (int rep = 0; rep < 100; ++rep) {
        const Index i = pick_i(rng), j = pick_j(rng);
        const auto [g1, g2] = coordinate_derivatives(state, factor, fixed, i, j);

        Matrix probe = factor;
        auto loss_at = [&](double v) {
            probe(i, j) = v;
            return oracles::subproblem_loss(probe, fixed, sym_target, cross_target);
        };
        const double v0 = factor(i, j);
        const double fd1 = (loss_at(v0 + h1) - loss_at(v0 - h1)) / (2.0 * h1);
        const double fd2 = (loss_at(v0 + h2) - 2.0 * loss_at(v0) + loss_at(v0 - h2)) / (h2 * h2);
        probe(i, j) = v0;

        CHECK(std::abs(fd1 - g1) <= 1e-5 * std::max(1.0, std::abs(g1)));
        CHECK(std::abs(fd2 - g2) <= 1e-4 * std::max(1.0, std::abs(g2)));
    }
}

TEST_CASE("apply_coordinate_update keeps residuals consistent") {
    std::mt19937_64 rng(4);
    const Index m1 = 3, m2 = 2, q = 2;
    Matrix factor = oracles::random_matrix(m1, q, rng);
    const Matrix fixed = oracles::random_matrix(m2, q, rng);
    const Matrix sym_target = planted_links(m1, m2, q, rng).intra_image;
    const Matrix cross_target = oracles::random_matrix(m1, m2, rng);
    ResidualState state = make_residuals(factor, fixed, sym_target, cross_target);

    SUBCASE("zero step is a no-op") {
        const ResidualState before = state;
        const Matrix f_before = factor;
        apply_coordinate_update(state, factor, fixed, 1, 1, 0.0);
        CHECK(state.sym == before.sym);
        CHECK(state.cross == before.cross);
        CHECK(factor == f_before);
    }

    SUBCASE("single update matches recomputation") {
        apply_coordinate_update(state, factor, fixed, 2, 0, 0.37);
        const ResidualState fresh = make_residuals(factor, fixed, sym_target, cross_target);
        CHECK((state.sym - fresh.sym).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((state.cross - fresh.cross).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("a thousand random updates drift below 1e-9") {
    std::mt19937_64 rng(5);
    const Index m1 = 12, m2 = 9, q = 4;
    Matrix factor = oracles::random_matrix(m1, q, rng);
    const Matrix fixed = oracles::random_matrix(m2, q, rng);
    const Matrix sym_target = planted_links(m1, m2, q, rng).intra_image;
    const Matrix cross_target = oracles::random_matrix(m1, m2, rng);
    ResidualState state = make_residuals(factor, fixed, sym_target, cross_target);

    std::uniform_int_distribution<Index> pick_i(0, m1 - 1), pick_j(0, q - 1);
    std::normal_distribution<double> step(0.0, 0.1);
    for (int rep = 0; rep < 1000; ++rep)
        apply_coordinate_update(state, factor, fixed, pick_i(rng), pick_j(rng), step(rng));

    const ResidualState fresh = make_residuals(factor, fixed, sym_target, cross_target);
    CHECK((state.sym - fresh.sym).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((state.cross - fresh.cross).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("mplcd_pass returns immediately at an exact fixed point") {
    std::mt19937_64 rng(6);
    Matrix factor = oracles::random_matrix(8, 3, rng);
    const Matrix fixed = oracles::random_matrix(6, 3, rng);
    const Matrix sym_target = factor * factor.transpose();
    const Matrix cross_target = factor * fixed.transpose();
    const Matrix before = factor;
    std::mt19937_64 solver_rng(0);
    const int sweeps = mplcd_pass(sym_target, cross_target, factor, fixed, config(3), solver_rng);
    CHECK(sweeps == 0);
    CHECK(factor == before);
}

TEST_CASE("mplcd_pass does not increase the loss on a planted instance") {
    std::mt19937_64 rng(7);
    const LinkMatrices links = planted_links(20, 15, 3, rng);
    Matrix factor = oracles::random_matrix(20, 3, rng, 0.5);
    const Matrix fixed = oracles::random_matrix(15, 3, rng, 0.5);
    const double before = oracles::subproblem_loss(factor, fixed, links.intra_image, links.cross);
    std::mt19937_64 solver_rng(1);
    mplcd_pass(links.intra_image, links.cross, factor, fixed, config(3), solver_rng);
    const double after = oracles::subproblem_loss(factor, fixed, links.intra_image, links.cross);
    CHECK(after <= before);
}

TEST_CASE("mplcd_pass stops early once converged") {
    // over-rank target: the loss settles at a positive plateau, so the
    // relative-change stop fires before the sweep budget runs out
    std::mt19937_64 rng(2);
    const Matrix w = oracles::random_matrix(10, 5, rng);
    const Matrix sym_target = w * w.transpose();
    const Matrix fixed = oracles::random_matrix(7, 2, rng);
    const Matrix cross_target = oracles::random_matrix(10, 7, rng);
    Matrix factor = oracles::random_matrix(10, 2, rng);
    std::mt19937_64 solver_rng(102);
    const int sweeps = mplcd_pass(sym_target, cross_target, factor, fixed, config(2), solver_rng);
    CHECK(sweeps < 10);
    CHECK(sweeps >= 1);
}

TEST_CASE("mplcd_pass raises a divergence error on a non-finite loss") {
    Matrix factor(1, 1), fixed(1, 1), sym_target(1, 1), cross_target(1, 1);
    factor << 0.5;
    fixed << 0.0;
    sym_target << -1e308;  // residual ~1e308, squared norm overflows
    cross_target << 0.0;
    std::mt19937_64 solver_rng(3);
    CHECK_THROWS_AS(mplcd_pass(sym_target, cross_target, factor, fixed, config(1), solver_rng),
                    DivergenceError);
}

TEST_CASE("mplcd_pass rejects asymmetric and misshapen targets") {
    std::mt19937_64 rng(9);
    Matrix factor = oracles::random_matrix(4, 2, rng);
    const Matrix fixed = oracles::random_matrix(3, 2, rng);
    Matrix bad_sym = oracles::random_matrix(4, 4, rng);  // materially asymmetric
    const Matrix cross_target = oracles::random_matrix(4, 3, rng);
    std::mt19937_64 solver_rng(4);
    CHECK_THROWS_AS(mplcd_pass(bad_sym, cross_target, factor, fixed, config(2), solver_rng),
                    DataError);
    const Matrix sym_target = bad_sym * bad_sym.transpose();
    CHECK_THROWS_AS(
        mplcd_pass(sym_target, oracles::random_matrix(3, 3, rng), factor, fixed, config(2), solver_rng),
        ShapeError);
}

TEST_CASE("solve_joint recovers a planted factorization") {
    std::mt19937_64 rng(10);
    const LinkMatrices links = planted_links(20, 15, 3, rng);
    SolverConfig cfg = config(3);
    cfg.seed = 42;
    const SolveResult result = solve_joint(links, cfg);
    REQUIRE(result.loss_trace.size() == 51);
    CHECK(result.loss_trace.back() <= 1e-6 * result.loss_trace.front());
    const double rel = (result.projections.proj_img * result.projections.proj_img.transpose() -
                        links.intra_image).norm() / links.intra_image.norm();
    CHECK(rel <= 1e-3);
    for (std::size_t i = 1; i < result.loss_trace.size(); ++i)
        CHECK(result.loss_trace[i] <= result.loss_trace[i - 1] + 1e-12);
}

TEST_CASE("solve_joint drives factors to zero on all-zero targets") {
    LinkMatrices links;
    links.intra_image = Matrix::Zero(10, 10);
    links.intra_text = Matrix::Zero(8, 8);
    links.cross = Matrix::Zero(10, 8);
    SolverConfig cfg = config(3);
    cfg.seed = 9;
    const SolveResult result = solve_joint(links, cfg);
    CHECK(result.loss_trace.back() <= result.loss_trace.front());
    CHECK(result.projections.proj_img.norm() <= 1e-3);
    CHECK(result.projections.proj_txt.norm() <= 1e-3);
}

TEST_CASE("solve_joint is deterministic for a fixed seed") {
    std::mt19937_64 rng(11);
    const LinkMatrices links = planted_links(9, 7, 2, rng);
    SolverConfig cfg = config(2);
    cfg.seed = 1234;
    const SolveResult r1 = solve_joint(links, cfg);
    const SolveResult r2 = solve_joint(links, cfg);
    CHECK(r1.projections.proj_img == r2.projections.proj_img);
    CHECK(r1.projections.proj_txt == r2.projections.proj_txt);
    CHECK(r1.loss_trace == r2.loss_trace);

    cfg.seed = 1235;
    const SolveResult r3 = solve_joint(links, cfg);
    CHECK(r1.projections.proj_img != r3.projections.proj_img);
}

TEST_CASE("solver config validation") {
    SolverConfig cfg;
    cfg.q = 0;
    CHECK_THROWS_AS(validate_solver_config(cfg), ConfigError);
    cfg = {};
    cfg.outer_loops = 0;
    CHECK_THROWS_AS(validate_solver_config(cfg), ConfigError);
    cfg = {};
    cfg.inner_iters = 0;
    CHECK_THROWS_AS(validate_solver_config(cfg), ConfigError);
    cfg = {};
    cfg.tol = 0.0;
    CHECK_THROWS_AS(validate_solver_config(cfg), ConfigError);
    cfg = {};
    cfg.hessian_floor = 0.0;
    CHECK_THROWS_AS(validate_solver_config(cfg), ConfigError);
}
