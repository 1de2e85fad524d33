#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "camlab/simplex.hpp"
#include "oracles.hpp"

using namespace camlab;

namespace {

MilpInstance random_boxed_lp(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nd(2, 4), md(2, 5);
    std::uniform_real_distribution<double> coef(-3.0, 3.0), rhsu(0.5, 6.0);
    MilpInstance m;
    m.n_vars = nd(rng);
    m.n_cons = md(rng);
    for (int j = 0; j < m.n_vars; ++j) {
        m.objective.push_back(coef(rng));
        m.lower.push_back(0.0);
        m.upper.push_back(4.0);
        m.integer_mask.push_back(false);
    }
    for (int i = 0; i < m.n_cons; ++i) {
        m.rhs.push_back(rhsu(rng));
        for (int j = 0; j < m.n_vars; ++j) {
            double v = coef(rng);
            if (std::abs(v) > 0.3) m.matrix.push_back({i, j, v});
        }
    }
    return m;
}

}  // namespace

TEST_CASE("known LP: optimum, duals, reduced costs") {
    // min -x0 - x1  s.t.  x0 + x1 <= 1,  0 <= x <= 1.
    MilpInstance m;
    m.n_vars = 2;
    m.n_cons = 1;
    m.objective = {-2.0, -1.0};
    m.matrix = {{0, 0, 1.0}, {0, 1, 1.0}};
    m.rhs = {1.0};
    m.lower = {0.0, 0.0};
    m.upper = {1.0, 1.0};
    m.integer_mask = {false, false};
    LpResult r = solve_lp(m);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == doctest::Approx(0.0));
    CHECK(r.objective == doctest::Approx(-2.0));
    // The row is tight with dual 2; sigma_j = c_j + duals'A_j.
    CHECK(r.row_tight[0]);
    CHECK(r.duals[0] == doctest::Approx(2.0));
    CHECK(r.reduced_costs[0] == doctest::Approx(0.0));
    CHECK(r.reduced_costs[1] == doctest::Approx(1.0));
    // x0 sits at its upper bound but enters the basis (the slack leaves at
    // zero); Basic is the correct status for this degenerate optimum.
    CHECK(r.basis_status[0] == BasisStatus::Basic);
    CHECK(r.basis_status[1] == BasisStatus::AtLower);
}

TEST_CASE("infeasible and unbounded detection") {
    MilpInstance m;
    m.n_vars = 1;
    m.n_cons = 1;
    m.objective = {1.0};
    m.matrix = {{0, 0, 1.0}};
    m.rhs = {-1.0};  // x <= -1 conflicts with x >= 0
    m.lower = {0.0};
    m.upper = {kInf};
    m.integer_mask = {false};
    CHECK(solve_lp(m).status == LpStatus::Infeasible);

    m.rhs = {5.0};
    m.objective = {-1.0};
    m.upper = {kInf};
    m.matrix = {{0, 0, -1.0}};  // -x <= 5 never binds upward
    CHECK(solve_lp(m).status == LpStatus::Unbounded);
}

TEST_CASE("objective matches the vertex-enumeration oracle on random LPs") {
    std::mt19937_64 rng(20240817);
    int solved = 0;
    for (int it = 0; it < 40; ++it) {
        MilpInstance m = random_boxed_lp(rng);
        LpResult r = solve_lp(m);
        auto oracle = oracles::lp_vertex_oracle(m);
        if (r.status == LpStatus::Infeasible) {
            CHECK_FALSE(oracle.feasible);
            continue;
        }
        REQUIRE(r.status == LpStatus::Optimal);
        REQUIRE(oracle.feasible);
        CHECK(r.objective == doctest::Approx(oracle.objective).epsilon(1e-6));
        ++solved;
    }
    CHECK(solved > 10);  // the generator must not be degenerate
}

TEST_CASE("optimality conditions hold at the reported solution") {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 25; ++it) {
        MilpInstance m = random_boxed_lp(rng);
        LpResult r = solve_lp(m);
        if (r.status != LpStatus::Optimal) continue;
        auto rows = dense_rows(m);
        for (int i = 0; i < m.n_cons; ++i) {
            double ax = 0.0;
            for (int j = 0; j < m.n_vars; ++j) ax += rows[i][j] * r.x[j];
            CHECK(ax <= m.rhs[i] + 1e-6);  // primal feasibility
            // Complementary slackness: positive dual only on tight rows.
            if (r.duals[i] > 1e-6) CHECK(ax >= m.rhs[i] - 1e-6);
            CHECK(r.duals[i] >= -1e-7);  // dual sign for <= rows in a min problem
        }
        for (int j = 0; j < m.n_vars; ++j) {
            CHECK(r.x[j] >= m.lower[j] - 1e-7);
            CHECK(r.x[j] <= m.upper[j] + 1e-7);
            // sigma_j = c_j + duals'A_j, with bound-direction sign conditions.
            double sigma = m.objective[j];
            for (int i = 0; i < m.n_cons; ++i) sigma += r.duals[i] * rows[i][j];
            CHECK(sigma == doctest::Approx(r.reduced_costs[j]).epsilon(1e-8));
            switch (r.basis_status[j]) {
                case BasisStatus::Basic: CHECK(std::abs(sigma) <= 1e-6); break;
                case BasisStatus::AtLower: CHECK(sigma >= -1e-6); break;
                case BasisStatus::AtUpper: CHECK(sigma <= 1e-6); break;
                case BasisStatus::FreeNonbasic: CHECK(std::abs(sigma) <= 1e-6); break;
            }
        }
    }
}

TEST_CASE("solves are bitwise deterministic") {
    std::mt19937_64 rng(3);
    MilpInstance m = random_boxed_lp(rng);
    LpResult a = solve_lp(m), b = solve_lp(m);
    CHECK(a.x == b.x);
    CHECK(a.duals == b.duals);
    CHECK(a.reduced_costs == b.reduced_costs);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("shift equivalence holds on random boxed LPs") {
    std::mt19937_64 rng(99);
    int applicable = 0;
    for (int it = 0; it < 20; ++it) {
        MilpInstance m = random_boxed_lp(rng);
        ShiftVector s = sample_shift(m, 5.0, rng);
        auto rep = check_shift_equivalence(m, s, 1e-6);
        if (!rep.applicable) continue;
        ++applicable;
        CHECK(rep.pass);
        CHECK(rep.max_primal_dev <= 1e-9);
        CHECK(rep.max_dual_dev <= 1e-9);
        CHECK(rep.max_reduced_cost_dev <= 1e-9);
        CHECK(rep.basis_match);
        CHECK(rep.iterations_orig == rep.iterations_shifted);
    }
    CHECK(applicable > 5);
}

TEST_CASE("iteration limit is reported, not looped") {
    std::mt19937_64 rng(5);
    MilpInstance m = random_boxed_lp(rng);
    SimplexOptions o;
    o.iteration_limit = 1;
    LpResult r = solve_lp(m, o);
    CHECK((r.status == LpStatus::IterationLimit || r.status == LpStatus::Optimal));
}
