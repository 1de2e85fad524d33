#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "camlab/milp.hpp"
#include "camlab/simplex.hpp"

namespace camlab {

inline constexpr int kNumConsFeats = 5;
inline constexpr int kNumVarFeats = 19;
inline constexpr const char* kStateSchema = "table1-v1";

// Constraint feature order.
enum ConsFeat { CF_ObjCosSim = 0, CF_Bias, CF_IsTight, CF_DualVal, CF_Age };

// Variable feature order: type one-hot (binary, integer, implicit integer,
// continuous), coef, has_lb, has_ub, sol_is_at_lb, sol_is_at_ub, sol_frac,
// basis one-hot (lower, basic, upper, free), reduced_cost, age, sol_val,
// inc_val, avg_inc_val.
enum VarFeat {
    VF_TypeBinary = 0, VF_TypeInteger, VF_TypeImplInt, VF_TypeContinuous,
    VF_Coef, VF_HasLb, VF_HasUb, VF_SolAtLb, VF_SolAtUb, VF_SolFrac,
    VF_BasisLower, VF_BasisBasic, VF_BasisUpper, VF_BasisFree,
    VF_ReducedCost, VF_Age, VF_SolVal, VF_IncVal, VF_AvgIncVal
};

struct StateEdge {
    int cons = 0;
    int var = 0;
    double coef = 0.0;  // a_ij / ||row i||
};

/// The bipartite node-feature encoding of one solved B&B node.
struct BipartiteState {
    std::vector<std::array<double, kNumConsFeats>> cons_feats;
    std::vector<std::array<double, kNumVarFeats>> var_feats;
    std::vector<StateEdge> edges;
    std::vector<int> candidates;  // fractional integer variables
    bool has_incumbent = false;
};

/// Solve-history context the Table-1 age and incumbent features need.
struct EncodeContext {
    long lp_solves_total = 0;
    long lp_solves_since_incumbent = 0;
    bool has_incumbent = false;
    std::vector<double> incumbent;      // best integral solution
    std::vector<double> incumbent_sum;  // running sum over all incumbents seen
    int incumbent_count = 0;

    void note_lp_solve() { ++lp_solves_total; ++lp_solves_since_incumbent; }
    void note_incumbent(const std::vector<double>& x) {
        if (incumbent_sum.empty()) incumbent_sum.assign(x.size(), 0.0);
        for (std::size_t j = 0; j < x.size(); ++j) incumbent_sum[j] += x[j];
        ++incumbent_count;
        incumbent = x;
        has_incumbent = true;
        lp_solves_since_incumbent = 0;
    }
    /// Context for the shifted problem: incumbents move with the shift.
    EncodeContext shifted(const ShiftVector& s) const {
        EncodeContext out = *this;
        if (has_incumbent) {
            for (std::size_t j = 0; j < s.s.size(); ++j) {
                out.incumbent[j] += s.s[j];
                out.incumbent_sum[j] += s.s[j] * incumbent_count;
            }
        }
        return out;
    }
};

inline double fractional_part(double v) { return v - std::floor(v); }

inline bool is_candidate_value(double v) {
    double f = fractional_part(v);
    return f > 1e-6 && f < 1.0 - 1e-6;
}

/// Table-1 encoding. Normalizations: bias and edge coefs by the row 2-norm,
/// objective coef by ||c||, dual by ||y||+1, reduced cost by ||c||+1, age by
/// the LP-solve counters in ctx. sol_frac is 0 for continuous variables.
inline BipartiteState encode_state(const MilpInstance& m, const LpResult& lp,
                                   const EncodeContext& ctx) {
    if (lp.status != LpStatus::Optimal)
        throw std::invalid_argument("encode_state requires an Optimal LP result");

    BipartiteState st;
    st.has_incumbent = ctx.has_incumbent;
    auto rows = dense_rows(m);

    double c_norm = 0.0;
    for (double c : m.objective) c_norm += c * c;
    c_norm = std::sqrt(c_norm);
    double y_norm = 0.0;
    for (double y : lp.duals) y_norm += y * y;
    y_norm = std::sqrt(y_norm);
    double age = static_cast<double>(ctx.lp_solves_since_incumbent) /
                 (1.0 + static_cast<double>(ctx.lp_solves_total));

    st.cons_feats.resize(m.n_cons);
    std::vector<double> row_norm(m.n_cons, 0.0);
    for (int i = 0; i < m.n_cons; ++i) {
        double rn = 0.0, dot = 0.0;
        for (int j = 0; j < m.n_vars; ++j) {
            rn += rows[i][j] * rows[i][j];
            dot += rows[i][j] * m.objective[j];
        }
        rn = std::sqrt(rn);
        row_norm[i] = rn;
        auto& f = st.cons_feats[i];
        f[CF_ObjCosSim] = (rn > 0 && c_norm > 0) ? dot / (rn * c_norm) : 0.0;
        f[CF_Bias] = rn > 0 ? m.rhs[i] / rn : m.rhs[i];
        f[CF_IsTight] = lp.row_tight[i] ? 1.0 : 0.0;
        f[CF_DualVal] = lp.duals[i] / (y_norm + 1.0);
        f[CF_Age] = age;
    }

    for (const auto& e : m.matrix) {
        double rn = row_norm[e.row];
        st.edges.push_back({e.row, e.col, rn > 0 ? e.value / rn : e.value});
    }

    st.var_feats.resize(m.n_vars);
    for (int j = 0; j < m.n_vars; ++j) {
        auto& f = st.var_feats[j];
        f.fill(0.0);
        bool binary = m.integer_mask[j] && m.lower[j] == 0.0 && m.upper[j] == 1.0;
        if (binary) f[VF_TypeBinary] = 1.0;
        else if (m.integer_mask[j]) f[VF_TypeInteger] = 1.0;
        else f[VF_TypeContinuous] = 1.0;
        f[VF_Coef] = c_norm > 0 ? m.objective[j] / c_norm : m.objective[j];
        bool has_lb = std::isfinite(m.lower[j]);
        bool has_ub = std::isfinite(m.upper[j]);
        f[VF_HasLb] = has_lb ? 1.0 : 0.0;
        f[VF_HasUb] = has_ub ? 1.0 : 0.0;
        f[VF_SolAtLb] = has_lb && std::abs(lp.x[j] - m.lower[j]) <= 1e-6 ? 1.0 : 0.0;
        f[VF_SolAtUb] = has_ub && std::abs(lp.x[j] - m.upper[j]) <= 1e-6 ? 1.0 : 0.0;
        // Values integral within tolerance have fractionality 0; without the
        // snap, a value an ulp below an integer would encode as ~1.
        f[VF_SolFrac] = m.integer_mask[j] && is_candidate_value(lp.x[j])
                            ? fractional_part(lp.x[j])
                            : 0.0;
        switch (lp.basis_status[j]) {
            case BasisStatus::AtLower: f[VF_BasisLower] = 1.0; break;
            case BasisStatus::Basic: f[VF_BasisBasic] = 1.0; break;
            case BasisStatus::AtUpper: f[VF_BasisUpper] = 1.0; break;
            case BasisStatus::FreeNonbasic: f[VF_BasisFree] = 1.0; break;
        }
        f[VF_ReducedCost] = lp.reduced_costs[j] / (c_norm + 1.0);
        f[VF_Age] = age;
        f[VF_SolVal] = lp.x[j];
        // Zero placeholders before the first incumbent; the augmentation map
        // leaves them untouched in that case.
        f[VF_IncVal] = ctx.has_incumbent ? ctx.incumbent[j] : 0.0;
        f[VF_AvgIncVal] = ctx.has_incumbent
                              ? ctx.incumbent_sum[j] / ctx.incumbent_count
                              : 0.0;
        if (m.integer_mask[j] && is_candidate_value(lp.x[j]))
            st.candidates.push_back(j);
    }
    return st;
}

/// The feature map from an original state to its shifted counterpart, without
/// re-solving anything: bias picks up a_i's (via the normalized edge coefs),
/// sol/incumbent values shift, binary<->integer type flips follow the shifted
/// bounds, everything else is copied verbatim.
inline BipartiteState derive_augmented_state(const BipartiteState& state,
                                             const MilpInstance& m,
                                             const ShiftVector& s) {
    if (static_cast<int>(s.s.size()) != m.n_vars ||
        static_cast<int>(state.var_feats.size()) != m.n_vars)
        throw std::invalid_argument("derive_augmented_state: dimension mismatch");
    BipartiteState out = state;
    for (const auto& e : out.edges)
        out.cons_feats[e.cons][CF_Bias] += e.coef * s.s[e.var];
    for (int j = 0; j < m.n_vars; ++j) {
        auto& f = out.var_feats[j];
        f[VF_SolVal] += s.s[j];
        if (state.has_incumbent) {
            f[VF_IncVal] += s.s[j];
            f[VF_AvgIncVal] += s.s[j];
        }
        if (m.integer_mask[j]) {
            double lo = std::isfinite(m.lower[j]) ? m.lower[j] + s.s[j] : -kInf;
            double up = std::isfinite(m.upper[j]) ? m.upper[j] + s.s[j] : kInf;
            bool binary = lo == 0.0 && up == 1.0;
            f[VF_TypeBinary] = binary ? 1.0 : 0.0;
            f[VF_TypeInteger] = binary ? 0.0 : 1.0;
        }
    }
    return out;
}

struct AugmentedCheckReport {
    bool applicable = false;
    bool pass = false;
    double max_deviation = 0.0;
    bool candidates_match = false;
};

inline double state_deviation(const BipartiteState& a, const BipartiteState& b) {
    double dev = 0.0;
    if (a.cons_feats.size() != b.cons_feats.size() ||
        a.var_feats.size() != b.var_feats.size() || a.edges.size() != b.edges.size())
        return kInf;
    for (std::size_t i = 0; i < a.cons_feats.size(); ++i)
        for (int k = 0; k < kNumConsFeats; ++k)
            dev = std::max(dev, std::abs(a.cons_feats[i][k] - b.cons_feats[i][k]));
    for (std::size_t j = 0; j < a.var_feats.size(); ++j)
        for (int k = 0; k < kNumVarFeats; ++k)
            dev = std::max(dev, std::abs(a.var_feats[j][k] - b.var_feats[j][k]));
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
        if (a.edges[e].cons != b.edges[e].cons || a.edges[e].var != b.edges[e].var)
            return kInf;
        dev = std::max(dev, std::abs(a.edges[e].coef - b.edges[e].coef));
    }
    return dev;
}

/// Oracle check: the derived augmented state must match a fresh encode of the
/// shifted instance (fresh LP solve, shifted context) to within tol.
inline AugmentedCheckReport cross_check_augmented(const MilpInstance& m,
                                                  const ShiftVector& s,
                                                  const EncodeContext& ctx,
                                                  double tol = 1e-9,
                                                  SimplexOptions opts = {}) {
    AugmentedCheckReport rep;
    LpResult lp = solve_lp(m, opts);
    if (lp.status != LpStatus::Optimal) return rep;
    MilpInstance shifted = shift_instance(m, s);
    LpResult lp2 = solve_lp(shifted, opts);
    if (lp2.status != LpStatus::Optimal) return rep;
    rep.applicable = true;
    BipartiteState derived = derive_augmented_state(encode_state(m, lp, ctx), m, s);
    BipartiteState fresh = encode_state(shifted, lp2, ctx.shifted(s));
    rep.max_deviation = state_deviation(derived, fresh);
    rep.candidates_match = derived.candidates == fresh.candidates;
    rep.pass = rep.candidates_match && rep.max_deviation <= tol;
    return rep;
}

}  // namespace camlab
