// Independent reference implementations used to check the solvers. These are
// deliberately naive: vertex enumeration for LPs and exhaustive enumeration
// for integer assignments. They share no code with the simplex or B&B paths.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "camlab/milp.hpp"

namespace oracles {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LpOracleResult {
    bool feasible = false;
    double objective = kInf;
    std::vector<double> x;
};

/// Brute-force LP oracle: enumerate all vertices (n-subsets of tight
/// constraints drawn from rows and finite bounds), keep the best feasible one.
/// Requires a bounded feasible region (finite box bounds suffice). Only
/// usable for small n.
inline LpOracleResult lp_vertex_oracle(const camlab::MilpInstance& m,
                                       double feas_tol = 1e-7) {
    const int n = m.n_vars;
    auto rows = camlab::dense_rows(m);
    // Constraint list as a'x <= b.
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (int i = 0; i < m.n_cons; ++i) {
        A.push_back(rows[i]);
        b.push_back(m.rhs[i]);
    }
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(m.upper[j])) {
            std::vector<double> a(n, 0.0);
            a[j] = 1.0;
            A.push_back(a);
            b.push_back(m.upper[j]);
        }
        if (std::isfinite(m.lower[j])) {
            std::vector<double> a(n, 0.0);
            a[j] = -1.0;
            A.push_back(a);
            b.push_back(-m.lower[j]);
        }
    }
    const int total = static_cast<int>(A.size());

    LpOracleResult best;
    std::vector<int> pick(n);
    // Iterate over all n-combinations of constraint indices.
    for (int i = 0; i < n; ++i) pick[i] = i;
    auto advance = [&]() {
        int i = n - 1;
        while (i >= 0 && pick[i] == total - n + i) --i;
        if (i < 0) return false;
        ++pick[i];
        for (int k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
        return true;
    };
    if (total < n) return best;
    do {
        Eigen::MatrixXd M(n, n);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) M(i, j) = A[pick[i]][j];
            rhs[i] = b[pick[i]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (!lu.isInvertible()) continue;
        Eigen::VectorXd x = lu.solve(rhs);
        bool ok = true;
        for (int i = 0; i < total && ok; ++i) {
            double ax = 0.0;
            for (int j = 0; j < n; ++j) ax += A[i][j] * x[j];
            if (ax > b[i] + feas_tol) ok = false;
        }
        if (!ok) continue;
        double obj = m.objective_constant;
        for (int j = 0; j < n; ++j) obj += m.objective[j] * x[j];
        if (!best.feasible || obj < best.objective) {
            best.feasible = true;
            best.objective = obj;
            best.x.assign(x.data(), x.data() + n);
        }
    } while (advance());
    return best;
}

struct MilpOracleResult {
    bool feasible = false;
    double objective = kInf;
};

/// Exhaustive MILP oracle: enumerate every integer assignment within bounds;
/// continuous variables (if any) are optimized by the vertex oracle on the
/// residual LP. Requires finite bounds on the integer variables.
inline MilpOracleResult milp_exhaustive_oracle(const camlab::MilpInstance& m,
                                               double feas_tol = 1e-7) {
    std::vector<int> int_vars, cont_vars;
    for (int j = 0; j < m.n_vars; ++j)
        (m.integer_mask[j] ? int_vars : cont_vars).push_back(j);
    auto rows = camlab::dense_rows(m);

    MilpOracleResult best;
    std::vector<long> assign(int_vars.size());
    for (std::size_t i = 0; i < int_vars.size(); ++i)
        assign[i] = static_cast<long>(std::ceil(m.lower[int_vars[i]]));

    auto evaluate = [&]() {
        if (cont_vars.empty()) {
            double obj = m.objective_constant;
            for (std::size_t i = 0; i < int_vars.size(); ++i)
                obj += m.objective[int_vars[i]] * static_cast<double>(assign[i]);
            for (int r = 0; r < m.n_cons; ++r) {
                double ax = 0.0;
                for (std::size_t i = 0; i < int_vars.size(); ++i)
                    ax += rows[r][int_vars[i]] * static_cast<double>(assign[i]);
                if (ax > m.rhs[r] + feas_tol) return;
            }
            if (!best.feasible || obj < best.objective) {
                best.feasible = true;
                best.objective = obj;
            }
            return;
        }
        // Residual LP over the continuous variables.
        camlab::MilpInstance sub;
        sub.n_vars = static_cast<int>(cont_vars.size());
        sub.n_cons = m.n_cons;
        std::vector<int> pos(m.n_vars, -1);
        for (std::size_t k = 0; k < cont_vars.size(); ++k) {
            pos[cont_vars[k]] = static_cast<int>(k);
            sub.objective.push_back(m.objective[cont_vars[k]]);
            sub.lower.push_back(m.lower[cont_vars[k]]);
            sub.upper.push_back(m.upper[cont_vars[k]]);
            sub.integer_mask.push_back(false);
        }
        sub.rhs = m.rhs;
        for (std::size_t i = 0; i < int_vars.size(); ++i)
            for (int r = 0; r < m.n_cons; ++r)
                sub.rhs[r] -= rows[r][int_vars[i]] * static_cast<double>(assign[i]);
        for (const auto& e : m.matrix)
            if (pos[e.col] >= 0) sub.matrix.push_back({e.row, pos[e.col], e.value});
        sub.objective_constant = m.objective_constant;
        for (std::size_t i = 0; i < int_vars.size(); ++i)
            sub.objective_constant +=
                m.objective[int_vars[i]] * static_cast<double>(assign[i]);
        LpOracleResult lr = lp_vertex_oracle(sub, feas_tol);
        if (lr.feasible && (!best.feasible || lr.objective < best.objective)) {
            best.feasible = true;
            best.objective = lr.objective;
        }
    };

    if (int_vars.empty()) {
        evaluate();
        return best;
    }
    while (true) {
        evaluate();
        std::size_t i = 0;
        while (i < assign.size()) {
            ++assign[i];
            if (assign[i] <= static_cast<long>(std::floor(m.upper[int_vars[i]]))) break;
            assign[i] = static_cast<long>(std::ceil(m.lower[int_vars[i]]));
            ++i;
        }
        if (i == assign.size()) break;
    }
    return best;
}

}  // namespace oracles
