#pragma once

#include <string>
#include <vector>

#include "camlab/bnb.hpp"
#include "camlab/encoder.hpp"
#include "camlab/milp.hpp"
#include "camlab/simplex.hpp"

namespace camlab {

/// All invariance theorems for one (instance, shift) pair: LP equivalence
/// (solution map, objective, duals, reduced costs, basis), the augmented-state
/// feature map, the FSB root decision, and the full FSB branching sequence.
struct PairCheck {
    bool applicable = false;  // root LP solved to optimality
    ShiftEquivalenceReport eq;
    AugmentedCheckReport aug;
    bool fsb_root_match = false;
    double fsb_score_dev = 0.0;
    bool fsb_sequence_match = false;
    long nodes_orig = 0, nodes_shifted = 0;

    bool pass() const {
        return applicable && eq.pass && aug.pass && fsb_root_match &&
               fsb_sequence_match;
    }
    std::string describe() const {
        if (!applicable) return "skipped (root LP not optimal)";
        if (pass()) return "pass";
        std::string out = "FAIL:";
        if (!eq.pass) out += " lp-equivalence";
        if (!aug.pass) out += " augmented-state";
        if (!fsb_root_match) out += " fsb-root";
        if (!fsb_sequence_match) out += " fsb-sequence";
        return out;
    }
};

inline PairCheck check_pair(const MilpInstance& m, const ShiftVector& s, double tol,
                            BnbLimits limits = {}, BnbOptions opts = {}) {
    PairCheck pc;
    pc.eq = check_shift_equivalence(m, s, tol, opts.simplex);
    if (!pc.eq.applicable) return pc;
    pc.applicable = true;

    EncodeContext ctx;
    ctx.note_lp_solve();
    pc.aug = cross_check_augmented(m, s, ctx, 1e-9, opts.simplex);

    // Root FSB decision identity.
    MilpInstance shifted = shift_instance(m, s);
    LpResult lp_o = solve_lp(m, opts.simplex);
    LpResult lp_s = solve_lp(shifted, opts.simplex);
    std::vector<int> cand_o, cand_s;
    for (int j = 0; j < m.n_vars; ++j) {
        if (m.integer_mask[j] && is_candidate_value(lp_o.x[j])) cand_o.push_back(j);
        if (shifted.integer_mask[j] && is_candidate_value(lp_s.x[j])) cand_s.push_back(j);
    }
    if (cand_o != cand_s) return pc;
    if (cand_o.empty()) {
        pc.fsb_root_match = true;  // integral root: no decision to compare
    } else {
        auto sc_o = fsb_scores(m, lp_o, cand_o, opts.fsb, opts.simplex);
        auto sc_s = fsb_scores(shifted, lp_s, cand_s, opts.fsb, opts.simplex);
        for (std::size_t i = 0; i < sc_o.size(); ++i)
            pc.fsb_score_dev = std::max(
                pc.fsb_score_dev,
                std::abs(sc_o[i] - sc_s[i]) / (1.0 + std::abs(sc_o[i])));
        pc.fsb_root_match = pc.fsb_score_dev <= tol &&
                            argmax_with_ties(sc_o, cand_o) ==
                                argmax_with_ties(sc_s, cand_s);
    }

    // Full FSB branching sequence identity.
    BnbOptions run = opts;
    run.record_trace = true;
    FsbPolicy f1(opts.fsb, opts.simplex), f2(opts.fsb, opts.simplex);
    BnbResult r_o = solve_bnb(m, f1, limits, run);
    BnbResult r_s = solve_bnb(shifted, f2, limits, run);
    pc.nodes_orig = r_o.nodes_processed;
    pc.nodes_shifted = r_s.nodes_processed;
    pc.fsb_sequence_match = r_o.trace.size() == r_s.trace.size();
    if (pc.fsb_sequence_match)
        for (std::size_t i = 0; i < r_o.trace.size(); ++i)
            if (r_o.trace[i].branch_var != r_s.trace[i].branch_var ||
                r_o.trace[i].depth != r_s.trace[i].depth) {
                pc.fsb_sequence_match = false;
                break;
            }
    return pc;
}

}  // namespace camlab
