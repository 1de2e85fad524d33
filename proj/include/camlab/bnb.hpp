#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "camlab/encoder.hpp"
#include "camlab/milp.hpp"
#include "camlab/samples.hpp"
#include "camlab/simplex.hpp"

namespace camlab {

enum class BnbStatus { OptimalProved, TimeLimit, NodeLimit, LpFailure };

struct BnbLimits {
    double time_s = 0.0;  // 0: none
    long nodes = 0;       // 0: none
};

struct BnbTraceEntry {
    int depth = 0;
    int branch_var = -1;
    double node_bound = 0.0;
};

struct BnbResult {
    BnbStatus status = BnbStatus::OptimalProved;
    double best_objective = kInf;
    std::optional<std::vector<double>> incumbent;
    long nodes_processed = 0;
    double wall_time = 0.0;
    long lp_iterations = 0;  // total simplex pivots, the deterministic work measure
    std::vector<BnbTraceEntry> trace;
};

struct NodeContext {
    const MilpInstance& node_instance;
    const LpResult& lp;
    int depth = 0;
};

/// A branching rule: pick a variable index from the candidate list.
class BranchingPolicy {
public:
    virtual ~BranchingPolicy() = default;
    virtual std::string name() const = 0;
    virtual int choose(const BipartiteState& state, const std::vector<int>& candidates,
                       const NodeContext& ctx) = 0;
    /// Called once per solve so stateful policies (pseudocost, random) reset.
    virtual void reset(std::uint64_t /*seed*/) {}
    /// Feedback after a child node's LP solve; pseudocosts learn from this.
    virtual void observe_child(int /*var*/, bool /*up_branch*/,
                               double /*gain_per_frac*/) {}
};

/// Tolerance-aware argmax: scores within a relative window of the maximum tie,
/// lowest candidate index wins. Keeps decisions stable under ulp-level noise.
inline int argmax_with_ties(const std::vector<double>& scores,
                            const std::vector<int>& candidates,
                            double rel_tol = 1e-9) {
    double best = -kInf;
    for (double v : scores) best = std::max(best, v);
    double window = rel_tol * (1.0 + std::abs(best));
    int chosen = -1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] >= best - window) {
            if (chosen < 0 || candidates[i] < candidates[chosen]) chosen = static_cast<int>(i);
        }
    }
    return candidates[chosen];
}

struct FsbOptions {
    double infeasible_gain = 1e8;
    double score_floor = 1e-6;
    bool sum_score = false;  // product of child gains is the default
};

/// Full strong branching scores: both child LPs are solved for every
/// candidate, score = max(gain_down, eps) * max(gain_up, eps).
inline std::vector<double> fsb_scores(const MilpInstance& node, const LpResult& lp,
                                      const std::vector<int>& candidates,
                                      FsbOptions fsb = {}, SimplexOptions opts = {},
                                      long* lp_iterations = nullptr) {
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (int j : candidates) {
        double gains[2];
        for (int side = 0; side < 2; ++side) {
            MilpInstance child = node;
            if (side == 0) child.upper[j] = std::floor(lp.x[j]);
            else child.lower[j] = std::ceil(lp.x[j]);
            LpResult r = solve_lp(child, opts);
            if (lp_iterations) *lp_iterations += r.iterations;
            if (r.status == LpStatus::Infeasible) gains[side] = fsb.infeasible_gain;
            else if (r.status == LpStatus::Optimal) gains[side] = r.objective - lp.objective;
            else throw std::runtime_error("unexpected child LP status: " +
                                          std::string(to_string(r.status)));
        }
        double a = std::max(gains[0], fsb.score_floor);
        double b = std::max(gains[1], fsb.score_floor);
        scores.push_back(fsb.sum_score ? a + b : a * b);
    }
    return scores;
}

class FsbPolicy : public BranchingPolicy {
public:
    explicit FsbPolicy(FsbOptions fsb = {}, SimplexOptions opts = {})
        : fsb_(fsb), opts_(opts) {}
    std::string name() const override { return "fsb"; }
    int choose(const BipartiteState&, const std::vector<int>& candidates,
               const NodeContext& ctx) override {
        auto scores = fsb_scores(ctx.node_instance, ctx.lp, candidates, fsb_, opts_,
                                 &lp_iterations);
        return argmax_with_ties(scores, candidates);
    }
    long lp_iterations = 0;  // charged to the owning search

private:
    FsbOptions fsb_;
    SimplexOptions opts_;
};

class MostFractionalPolicy : public BranchingPolicy {
public:
    std::string name() const override { return "mostfrac"; }
    int choose(const BipartiteState&, const std::vector<int>& candidates,
               const NodeContext& ctx) override {
        std::vector<double> scores;
        for (int j : candidates) {
            double f = fractional_part(ctx.lp.x[j]);
            scores.push_back(std::min(f, 1.0 - f));
        }
        return argmax_with_ties(scores, candidates);
    }
};

class RandomPolicy : public BranchingPolicy {
public:
    explicit RandomPolicy(std::uint64_t seed = 0) : rng_(seed) {}
    std::string name() const override { return "random"; }
    void reset(std::uint64_t seed) override { rng_.seed(seed); }
    int choose(const BipartiteState&, const std::vector<int>& candidates,
               const NodeContext&) override {
        std::uniform_int_distribution<std::size_t> d(0, candidates.size() - 1);
        return candidates[d(rng_)];
    }

private:
    std::mt19937_64 rng_;
};

/// Plain averaged pseudocosts seeded at 1, product score as for FSB.
class PseudocostPolicy : public BranchingPolicy {
public:
    std::string name() const override { return "pseudocost"; }
    void reset(std::uint64_t) override { stats_.clear(); }
    int choose(const BipartiteState&, const std::vector<int>& candidates,
               const NodeContext& ctx) override {
        std::vector<double> scores;
        for (int j : candidates) {
            double f = fractional_part(ctx.lp.x[j]);
            auto [dn, up] = average(j);
            scores.push_back(std::max(dn * f, 1e-6) * std::max(up * (1.0 - f), 1e-6));
        }
        return argmax_with_ties(scores, candidates);
    }
    void observe_child(int var, bool up_branch, double gain_per_frac) override {
        auto& s = stats_[var];
        if (up_branch) { s.up_sum += gain_per_frac; ++s.up_n; }
        else { s.dn_sum += gain_per_frac; ++s.dn_n; }
    }

private:
    struct Stats { double up_sum = 0, dn_sum = 0; int up_n = 0, dn_n = 0; };
    std::map<int, Stats> stats_;
    std::pair<double, double> average(int var) const {
        auto it = stats_.find(var);
        if (it == stats_.end()) return {1.0, 1.0};
        const auto& s = it->second;
        return {s.dn_n ? s.dn_sum / s.dn_n : 1.0, s.up_n ? s.up_sum / s.up_n : 1.0};
    }
};

struct BnbOptions {
    SimplexOptions simplex;
    FsbOptions fsb;
    double integrality_tol = 1e-6;
    double prune_tol = 1e-9;
    bool record_trace = false;
    bool depth_first = false;  // default: best-bound
    std::uint64_t seed = 0;
    /// Invoked at every branching node, before expansion.
    std::function<void(const BipartiteState&, int chosen_var,
                       const std::vector<int>& candidates,
                       const MilpInstance& node_instance, int depth)>
        on_branch;
};

namespace detail {

struct OpenNode {
    long id = 0;
    int depth = 0;
    double bound = -kInf;
    std::vector<std::pair<int, double>> lower_tightenings;
    std::vector<std::pair<int, double>> upper_tightenings;
    int branch_var = -1;       // variable this child was created by branching on
    bool branch_up = false;
    double branch_frac = 0.0;  // fractional part at the parent
};

struct NodeOrder {
    bool depth_first;
    // Best-bound keys are quantized so that ulp-level noise between a MILP
    // and its shifted twin cannot reorder equal-bound nodes.
    bool operator()(const OpenNode& a, const OpenNode& b) const {
        if (depth_first) {
            if (a.depth != b.depth) return a.depth < b.depth;
            return a.id > b.id;
        }
        long long qa = std::llround(a.bound * 1e6), qb = std::llround(b.bound * 1e6);
        if (qa != qb) return qa > qb;
        return a.id > b.id;
    }
};

}  // namespace detail

inline BnbResult solve_bnb(const MilpInstance& root, BranchingPolicy& policy,
                           BnbLimits limits = {}, BnbOptions opts = {}) {
    auto t0 = std::chrono::steady_clock::now();
    policy.reset(opts.seed);
    auto* fsb = dynamic_cast<FsbPolicy*>(&policy);
    if (fsb) fsb->lp_iterations = 0;

    BnbResult res;
    EncodeContext ctx;
    std::priority_queue<detail::OpenNode, std::vector<detail::OpenNode>,
                        detail::NodeOrder>
        open(detail::NodeOrder{opts.depth_first});
    long next_id = 0;
    open.push({next_id++, 0, -kInf, {}, {}});

    double best_obj = kInf;
    std::optional<std::vector<double>> incumbent;

    while (!open.empty()) {
        if (limits.nodes > 0 && res.nodes_processed >= limits.nodes) {
            res.status = BnbStatus::NodeLimit;
            break;
        }
        double elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0).count();
        if (limits.time_s > 0 && elapsed > limits.time_s) {
            res.status = BnbStatus::TimeLimit;
            break;
        }

        detail::OpenNode node = open.top();
        open.pop();
        if (incumbent && node.bound >= best_obj - opts.prune_tol && node.id != 0)
            continue;

        MilpInstance ni = root;
        for (auto [j, v] : node.lower_tightenings) ni.lower[j] = std::max(ni.lower[j], v);
        for (auto [j, v] : node.upper_tightenings) ni.upper[j] = std::min(ni.upper[j], v);

        LpResult lp = solve_lp(ni, opts.simplex);
        ++res.nodes_processed;
        res.lp_iterations += lp.iterations;
        ctx.note_lp_solve();

        if (lp.status == LpStatus::IterationLimit || lp.status == LpStatus::Unbounded) {
            if (lp.status == LpStatus::Unbounded && node.id == 0)
                throw std::runtime_error("root LP unbounded");
            res.status = BnbStatus::LpFailure;
            break;
        }
        if (lp.status == LpStatus::Infeasible) continue;
        if (node.branch_var >= 0) {
            double frac = node.branch_up ? 1.0 - node.branch_frac : node.branch_frac;
            if (frac > 1e-6)
                policy.observe_child(node.branch_var, node.branch_up,
                                     (lp.objective - node.bound) / frac);
        }
        if (incumbent && lp.objective >= best_obj - opts.prune_tol) continue;

        std::vector<int> candidates;
        for (int j = 0; j < ni.n_vars; ++j)
            if (ni.integer_mask[j] && is_candidate_value(lp.x[j]))
                candidates.push_back(j);

        if (candidates.empty()) {
            if (lp.objective < best_obj - opts.prune_tol || !incumbent) {
                best_obj = lp.objective;
                incumbent = lp.x;
                ctx.note_incumbent(lp.x);
            }
            continue;
        }

        BipartiteState state = encode_state(ni, lp, ctx);
        state.candidates = candidates;
        NodeContext nctx{ni, lp, node.depth};
        int var = policy.choose(state, candidates, nctx);
        if (opts.on_branch) opts.on_branch(state, var, candidates, ni, node.depth);
        if (opts.record_trace) res.trace.push_back({node.depth, var, lp.objective});

        double frac = fractional_part(lp.x[var]);
        detail::OpenNode down{next_id++, node.depth + 1, lp.objective,
                              node.lower_tightenings, node.upper_tightenings,
                              var, false, frac};
        down.upper_tightenings.emplace_back(var, std::floor(lp.x[var]));
        detail::OpenNode up{next_id++, node.depth + 1, lp.objective,
                            node.lower_tightenings, node.upper_tightenings,
                            var, true, frac};
        up.lower_tightenings.emplace_back(var, std::ceil(lp.x[var]));
        open.push(down);
        open.push(up);
    }

    res.best_objective = best_obj;
    res.incumbent = incumbent;
    if (fsb) res.lp_iterations += fsb->lp_iterations;
    res.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// Expert rollouts

struct CollectStats {
    long instances_used = 0;
    long instances_skipped = 0;  // infeasible root LP
};

inline std::vector<ExpertSample> collect_expert_samples(
    const std::vector<MilpInstance>& instances, long per_instance_node_cap,
    CollectStats* stats = nullptr, BnbOptions opts = {}) {
    std::vector<ExpertSample> out;
    CollectStats local;
    for (const auto& inst : instances) {
        if (solve_lp(inst, opts.simplex).status != LpStatus::Optimal) {
            ++local.instances_skipped;
            continue;
        }
        ++local.instances_used;
        long taken = 0;
        FsbPolicy fsb(opts.fsb, opts.simplex);
        BnbOptions run_opts = opts;
        run_opts.on_branch = [&](const BipartiteState& st, int var,
                                 const std::vector<int>& cands,
                                 const MilpInstance& ni, int depth) {
            if (taken >= per_instance_node_cap) return;
            ++taken;
            ExpertSample s;
            s.state = st;
            s.candidates = cands;
            auto it = std::find(cands.begin(), cands.end(), var);
            s.action = static_cast<int>(it - cands.begin());
            s.instance = ni;
            s.instance_ref = inst.label;
            s.depth = depth;
            out.push_back(std::move(s));
        };
        solve_bnb(inst, fsb, {}, run_opts);
    }
    if (stats) *stats = local;
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

/// Shifted geometric mean, computed in log space.
inline double sgm(const std::vector<double>& values, double shift) {
    if (values.empty()) throw std::invalid_argument("sgm of empty input");
    double acc = 0.0;
    for (double v : values) {
        if (v + shift <= 0) throw std::invalid_argument("sgm requires value + shift > 0");
        acc += std::log(v + shift);
    }
    return std::exp(acc / static_cast<double>(values.size())) - shift;
}

struct PolicyMetrics {
    std::string policy;
    double sgm_time_s = 0.0;
    double sgm_nodes = 0.0;
    long wins = 0;
    long solved = 0;
};

struct MetricsReport {
    std::string level;
    std::vector<PolicyMetrics> rows;
    long instances = 0;
    long unsolved_excluded = 0;

    std::string to_csv() const {
        std::string out = "policy,level,sgm_time_s,sgm_nodes,wins,solved\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%ld,%ld\n",
                          r.policy.c_str(), level.c_str(), r.sgm_time_s, r.sgm_nodes,
                          r.wins, r.solved);
            out += buf;
        }
        return out;
    }
};

/// Run every policy on every instance. "time" is wall clock, or the total
/// simplex pivot count when virtual_time is set (deterministic reruns).
inline MetricsReport compare_policies(const std::vector<MilpInstance>& instances,
                                      const std::vector<BranchingPolicy*>& policies,
                                      BnbLimits limits = {}, BnbOptions opts = {},
                                      bool virtual_time = true,
                                      const std::string& level = "desk") {
    MetricsReport rep;
    rep.level = level;
    rep.instances = static_cast<long>(instances.size());
    const std::size_t np = policies.size();
    std::vector<std::vector<double>> times(np), nodes(np);
    std::vector<long> wins(np, 0), solved(np, 0);

    for (const auto& inst : instances) {
        std::vector<double> t(np, kInf);
        std::vector<bool> ok(np, false);
        for (std::size_t p = 0; p < np; ++p) {
            BnbResult r = solve_bnb(inst, *policies[p], limits, opts);
            if (r.status == BnbStatus::OptimalProved) {
                ok[p] = true;
                t[p] = virtual_time ? static_cast<double>(r.lp_iterations) : r.wall_time;
                times[p].push_back(t[p]);
                nodes[p].push_back(static_cast<double>(r.nodes_processed));
                ++solved[p];
            } else {
                ++rep.unsolved_excluded;
            }
        }
        double best = kInf;
        for (std::size_t p = 0; p < np; ++p)
            if (ok[p]) best = std::min(best, t[p]);
        if (std::isfinite(best))
            for (std::size_t p = 0; p < np; ++p)
                if (ok[p] && t[p] == best) ++wins[p];  // ties award all tied policies
    }

    for (std::size_t p = 0; p < np; ++p) {
        PolicyMetrics pm;
        pm.policy = policies[p]->name();
        pm.wins = wins[p];
        pm.solved = solved[p];
        pm.sgm_time_s = times[p].empty() ? 0.0 : sgm(times[p], 1.0);
        pm.sgm_nodes = nodes[p].empty() ? 0.0 : sgm(nodes[p], 100.0);
        rep.rows.push_back(pm);
    }
    return rep;
}

}  // namespace camlab
