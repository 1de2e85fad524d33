#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "camlab/milp.hpp"

namespace camlab {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

enum class BasisStatus { AtLower, Basic, AtUpper, FreeNonbasic };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "Optimal";
        case LpStatus::Infeasible: return "Infeasible";
        case LpStatus::Unbounded: return "Unbounded";
        case LpStatus::IterationLimit: return "IterationLimit";
    }
    return "?";
}

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;              // primal optimum, length n_vars
    double objective = 0.0;             // c'x + objective_constant
    std::vector<double> duals;          // y >= 0, length n_cons
    std::vector<double> reduced_costs;  // sigma_j = c_j + y'A_j
    std::vector<BasisStatus> basis_status;
    std::vector<bool> row_tight;
    long iterations = 0;
};

struct SimplexOptions {
    double feas_tol = 1e-7;
    double opt_tol = 1e-9;
    double pivot_tol = 1e-10;
    double ratio_tie_tol = 1e-9;
    long iteration_limit = 0;  // 0: 50*(n_vars+n_cons)
};

/// Bounded-variable primal simplex, two-phase with artificials, Bland's rule
/// for entering and leaving variables. Fully deterministic: identical inputs
/// produce identical pivot sequences. Because all pivot decisions depend only
/// on A, c and the basis (never on the shifted quantities b, l, u except
/// through shift-invariant slacks and bound gaps), a MILP and its shifted
/// counterpart traverse the same bases.
class SimplexSolver {
public:
    explicit SimplexSolver(SimplexOptions opts = {}) : opts_(opts) {}

    LpResult solve(const MilpInstance& p) const {
        const int n = p.n_vars;
        const int m = p.n_cons;
        LpResult res;
        res.x.assign(n, 0.0);
        res.duals.assign(m, 0.0);
        res.reduced_costs.assign(n, 0.0);
        res.basis_status.assign(n, BasisStatus::AtLower);
        res.row_tight.assign(m, false);

        // Extended columns: [structural | slacks | artificials].
        Work w;
        w.n = n;
        w.m = m;
        w.total = n + m;
        w.cols.assign(n + m, {});
        for (int j = 0; j < n + m; ++j) w.cols[j].reserve(4);
        for (const auto& e : p.matrix) w.cols[e.col].push_back({e.row, e.value});
        for (int i = 0; i < m; ++i) w.cols[n + i].push_back({i, 1.0});
        w.lo.assign(n + m, 0.0);
        w.up.assign(n + m, kInf);
        for (int j = 0; j < n; ++j) {
            w.lo[j] = p.lower[j];
            w.up[j] = p.upper[j];
        }
        w.b = p.rhs;
        w.status.assign(n + m, VarState::AtLower);
        w.value.assign(n + m, 0.0);

        for (int j = 0; j < n; ++j) {
            if (std::isfinite(w.lo[j])) {
                w.status[j] = VarState::AtLower;
                w.value[j] = w.lo[j];
            } else if (std::isfinite(w.up[j])) {
                w.status[j] = VarState::AtUpper;
                w.value[j] = w.up[j];
            } else {
                w.status[j] = VarState::Free;
                w.value[j] = 0.0;
            }
        }

        // Slack start values with structurals at their bounds.
        std::vector<double> slack(m);
        for (int i = 0; i < m; ++i) slack[i] = w.b[i];
        for (int j = 0; j < n; ++j)
            for (const auto& [row, val] : w.cols[j]) slack[row] -= val * w.value[j];

        w.basis.resize(m);
        bool need_phase1 = false;
        for (int i = 0; i < m; ++i)
            if (slack[i] < -opts_.feas_tol) need_phase1 = true;

        long iter_limit = opts_.iteration_limit > 0 ? opts_.iteration_limit
                                                    : 50L * (n + m);
        long iterations = 0;

        if (need_phase1) {
            // One artificial per initially infeasible row, column -e_i.
            for (int i = 0; i < m; ++i) {
                if (slack[i] < -opts_.feas_tol) {
                    int a = w.total++;
                    w.cols.push_back({{i, -1.0}});
                    w.lo.push_back(0.0);
                    w.up.push_back(kInf);
                    w.status.push_back(VarState::Basic);
                    w.value.push_back(-slack[i]);
                    w.basis[i] = a;
                    w.artificial_from = std::min(w.artificial_from, a);
                } else {
                    w.basis[i] = n + i;
                    w.status[n + i] = VarState::Basic;
                    w.value[n + i] = slack[i];
                }
            }
            std::vector<double> phase1_cost(w.total, 0.0);
            for (int j = n + m; j < w.total; ++j) phase1_cost[j] = 1.0;
            auto st = run(w, phase1_cost, iter_limit, iterations, /*phase1=*/true);
            if (st == RunStatus::IterLimit) {
                res.status = LpStatus::IterationLimit;
                res.iterations = iterations;
                return res;
            }
            double infeas = 0.0;
            for (int j = n + m; j < w.total; ++j) infeas += w.value[j];
            if (infeas > opts_.feas_tol) {
                res.status = LpStatus::Infeasible;
                res.iterations = iterations;
                return res;
            }
            // Freeze artificials at zero for phase 2.
            for (int j = n + m; j < w.total; ++j) {
                w.lo[j] = 0.0;
                w.up[j] = 0.0;
                if (w.status[j] != VarState::Basic) {
                    w.status[j] = VarState::AtLower;
                    w.value[j] = 0.0;
                }
            }
        } else {
            for (int i = 0; i < m; ++i) {
                w.basis[i] = n + i;
                w.status[n + i] = VarState::Basic;
                w.value[n + i] = slack[i];
            }
        }

        std::vector<double> cost(w.total, 0.0);
        for (int j = 0; j < n; ++j) cost[j] = p.objective[j];
        auto st = run(w, cost, iter_limit, iterations, /*phase1=*/false);
        res.iterations = iterations;
        if (st == RunStatus::IterLimit) {
            res.status = LpStatus::IterationLimit;
            return res;
        }
        if (st == RunStatus::Unbounded) {
            res.status = LpStatus::Unbounded;
            return res;
        }

        res.status = LpStatus::Optimal;
        double obj = p.objective_constant;
        for (int j = 0; j < n; ++j) {
            res.x[j] = w.value[j];
            obj += p.objective[j] * w.value[j];
        }
        res.objective = obj;

        // Duals from the final basis: solve B'y = c_B, report -y so that
        // sigma_j = c_j + duals'A_j and duals >= 0 on tight rows.
        Eigen::MatrixXd B = basis_matrix(w);
        Eigen::VectorXd cB(m);
        for (int i = 0; i < m; ++i) cB[i] = cost[w.basis[i]];
        Eigen::VectorXd y = B.transpose().partialPivLu().solve(cB);
        for (int i = 0; i < m; ++i) res.duals[i] = -y[i];
        for (int j = 0; j < n; ++j) {
            double sigma = cost[j];
            for (const auto& [row, val] : w.cols[j]) sigma -= y[row] * val;
            res.reduced_costs[j] = sigma;
            switch (w.status[j]) {
                case VarState::Basic: res.basis_status[j] = BasisStatus::Basic; break;
                case VarState::AtLower: res.basis_status[j] = BasisStatus::AtLower; break;
                case VarState::AtUpper: res.basis_status[j] = BasisStatus::AtUpper; break;
                case VarState::Free: res.basis_status[j] = BasisStatus::FreeNonbasic; break;
            }
        }
        {
            std::vector<double> ax(m, 0.0);
            for (int j = 0; j < n; ++j)
                for (const auto& [row, val] : w.cols[j]) ax[row] += val * res.x[j];
            for (int i = 0; i < m; ++i) res.row_tight[i] = (p.rhs[i] - ax[i] <= 1e-6);
        }
        return res;
    }

private:
    enum class VarState { AtLower, Basic, AtUpper, Free };
    enum class RunStatus { Optimal, Unbounded, IterLimit };

    struct Work {
        int n = 0, m = 0, total = 0;
        std::vector<std::vector<std::pair<int, double>>> cols;
        std::vector<double> lo, up, b;
        std::vector<VarState> status;
        std::vector<double> value;
        std::vector<int> basis;
        int artificial_from = std::numeric_limits<int>::max();
    };

    SimplexOptions opts_;

    static Eigen::MatrixXd basis_matrix(const Work& w) {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(w.m, w.m);
        for (int i = 0; i < w.m; ++i)
            for (const auto& [row, val] : w.cols[w.basis[i]]) B(row, i) = val;
        return B;
    }

    RunStatus run(Work& w, const std::vector<double>& cost, long iter_limit,
                  long& iterations, bool phase1) const {
        const int m = w.m;
        while (true) {
            if (iterations >= iter_limit) return RunStatus::IterLimit;

            Eigen::MatrixXd B = basis_matrix(w);
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);

            // Basic values from nonbasic point: x_B = B^{-1}(b - N x_N).
            Eigen::VectorXd rhs(m);
            for (int i = 0; i < m; ++i) rhs[i] = w.b[i];
            for (int j = 0; j < w.total; ++j) {
                if (w.status[j] == VarState::Basic) continue;
                if (w.value[j] == 0.0) continue;
                for (const auto& [row, val] : w.cols[j]) rhs[row] -= val * w.value[j];
            }
            Eigen::VectorXd xB = lu.solve(rhs);
            for (int i = 0; i < m; ++i) w.value[w.basis[i]] = xB[i];

            Eigen::VectorXd cB(m);
            for (int i = 0; i < m; ++i) cB[i] = cost[w.basis[i]];
            Eigen::VectorXd y = B.transpose().partialPivLu().solve(cB);

            // Entering: lowest eligible index (Bland).
            int enter = -1;
            int dir = 0;
            for (int j = 0; j < w.total; ++j) {
                if (w.status[j] == VarState::Basic) continue;
                if (w.lo[j] == w.up[j] && std::isfinite(w.lo[j])) continue;  // fixed
                double sigma = cost[j];
                for (const auto& [row, val] : w.cols[j]) sigma -= y[row] * val;
                if (w.status[j] == VarState::AtLower && sigma < -opts_.opt_tol) {
                    enter = j; dir = +1; break;
                }
                if (w.status[j] == VarState::AtUpper && sigma > opts_.opt_tol) {
                    enter = j; dir = -1; break;
                }
                if (w.status[j] == VarState::Free && std::abs(sigma) > opts_.opt_tol) {
                    enter = j; dir = sigma > 0 ? -1 : +1; break;
                }
            }
            if (enter < 0) return RunStatus::Optimal;

            Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
            for (const auto& [row, val] : w.cols[enter]) a[row] = val;
            Eigen::VectorXd d = lu.solve(a);  // x_B changes by -dir*t*d

            // Ratio test with a tie window; ties resolved by lowest variable
            // index so the pivot sequence is immune to ulp-level noise in the
            // shifted problem.
            double t_best = kInf;
            int leave_pos = -1;     // position in basis, -1: bound flip
            double t_bound = kInf;
            if (std::isfinite(w.lo[enter]) && std::isfinite(w.up[enter]))
                t_bound = w.up[enter] - w.lo[enter];

            for (int i = 0; i < m; ++i) {
                double delta = -dir * d[i];
                if (std::abs(delta) <= opts_.pivot_tol) continue;
                int bj = w.basis[i];
                double t;
                if (delta < 0) {
                    if (!std::isfinite(w.lo[bj])) continue;
                    t = (w.value[bj] - w.lo[bj]) / (-delta);
                } else {
                    if (!std::isfinite(w.up[bj])) continue;
                    t = (w.up[bj] - w.value[bj]) / delta;
                }
                if (t < 0) t = 0;
                if (t < t_best - opts_.ratio_tie_tol) {
                    t_best = t;
                    leave_pos = i;
                } else if (t <= t_best + opts_.ratio_tie_tol && leave_pos >= 0 &&
                           bj < w.basis[leave_pos]) {
                    leave_pos = i;
                    if (t < t_best) t_best = t;
                }
            }

            if (!std::isfinite(t_best) && !std::isfinite(t_bound))
                return phase1 ? RunStatus::Optimal : RunStatus::Unbounded;

            ++iterations;
            // Tie-tolerant like the ratio test: when the entering variable's
            // bound gap and the blocking ratio are equal to within the window,
            // both runs of a shifted pair must take the same branch.
            if (t_bound < t_best - opts_.ratio_tie_tol) {
                // Bound flip, basis unchanged.
                w.status[enter] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
                w.value[enter] = dir > 0 ? w.up[enter] : w.lo[enter];
                continue;
            }

            int leave = w.basis[leave_pos];
            double delta = -dir * d[leave_pos];
            w.status[leave] = delta < 0 ? VarState::AtLower : VarState::AtUpper;
            w.value[leave] = delta < 0 ? w.lo[leave] : w.up[leave];
            if (phase1 && leave >= w.n + w.m) {
                // Departed artificials never re-enter.
                w.lo[leave] = 0.0;
                w.up[leave] = 0.0;
                w.status[leave] = VarState::AtLower;
                w.value[leave] = 0.0;
            }
            w.basis[leave_pos] = enter;
            double enter_from = w.status[enter] == VarState::AtUpper ? w.up[enter]
                               : w.status[enter] == VarState::AtLower ? w.lo[enter]
                                                                      : 0.0;
            w.status[enter] = VarState::Basic;
            w.value[enter] = enter_from + dir * t_best;
        }
    }
};

inline LpResult solve_lp(const MilpInstance& p, SimplexOptions opts = {}) {
    return SimplexSolver(opts).solve(lp_relaxation(p));
}

// ---------------------------------------------------------------------------

/// Numeric check of the shift-correspondence results: x_hat = x + s, equal
/// objectives, equal duals, equal reduced costs, equal basis statuses.
struct ShiftEquivalenceReport {
    bool applicable = false;
    bool pass = false;
    double max_primal_dev = 0.0;    // max|x_hat - x - s|
    double objective_dev = 0.0;
    double max_dual_dev = 0.0;
    double max_reduced_cost_dev = 0.0;
    bool basis_match = false;
    long iterations_orig = 0;
    long iterations_shifted = 0;
};

inline ShiftEquivalenceReport check_shift_equivalence(const MilpInstance& m,
                                                      const ShiftVector& s,
                                                      double tol,
                                                      SimplexOptions opts = {}) {
    ShiftEquivalenceReport rep;
    LpResult a = solve_lp(m, opts);
    LpResult b = solve_lp(shift_instance(m, s), opts);
    if (a.status != LpStatus::Optimal || b.status != LpStatus::Optimal) return rep;
    rep.applicable = true;
    rep.iterations_orig = a.iterations;
    rep.iterations_shifted = b.iterations;
    for (int j = 0; j < m.n_vars; ++j) {
        rep.max_primal_dev = std::max(rep.max_primal_dev,
                                      std::abs(b.x[j] - a.x[j] - s.s[j]));
        rep.max_reduced_cost_dev = std::max(
            rep.max_reduced_cost_dev, std::abs(b.reduced_costs[j] - a.reduced_costs[j]));
    }
    rep.objective_dev = std::abs(b.objective - a.objective);
    for (int i = 0; i < m.n_cons; ++i)
        rep.max_dual_dev = std::max(rep.max_dual_dev, std::abs(b.duals[i] - a.duals[i]));
    rep.basis_match = a.basis_status == b.basis_status;
    rep.pass = rep.basis_match && rep.max_primal_dev <= tol &&
               rep.objective_dev <= tol && rep.max_dual_dev <= tol &&
               rep.max_reduced_cost_dev <= tol;
    return rep;
}

}  // namespace camlab
