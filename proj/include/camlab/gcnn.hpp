#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camlab/encoder.hpp"

namespace camlab {

inline constexpr int kHidden = 64;
inline constexpr const char* kModelSchema = "gcnn-v1";

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Linear {
    MatrixXd W;  // out x in
    VectorXd b;
};

/// Two-layer perceptron, ReLU on the hidden layer, optional ReLU on the
/// output (the convolution MLPs keep it, the score head does not).
struct Mlp2 {
    Linear l1, l2;
    bool relu_out = true;
};

struct GcnnParams {
    Mlp2 cons_embed;   // 5 -> 64 -> 64
    Mlp2 var_embed;    // 19 -> 64 -> 64
    Mlp2 edge_embed;   // 1 -> 64 -> 64
    Mlp2 conv_cons_msg;  // g_C: 192 -> 64 -> 64
    Mlp2 conv_cons_out;  // f_C: 128 -> 64 -> 64
    Mlp2 conv_var_msg;   // g_V: 192 -> 64 -> 64
    Mlp2 conv_var_out;   // f_V: 128 -> 64 -> 64
    Mlp2 score_head;     // 64 -> 64 -> 1, linear output
    Linear pool_cons;    // 128 -> 64
    Linear pool_var;     // 128 -> 64
    Linear pool_graph;   // 128 -> 64
    // Per-feature standardization, baked into the artifact and applied
    // identically to original and augmented states.
    VectorXd cons_mean, cons_std;  // length 5
    VectorXd var_mean, var_std;    // length 19
    VectorXd edge_mean, edge_std;  // length 1

    template <typename F>
    void visit_linears(F&& f) {
        for (Mlp2* m : {&cons_embed, &var_embed, &edge_embed, &conv_cons_msg,
                        &conv_cons_out, &conv_var_msg, &conv_var_out, &score_head}) {
            f(m->l1);
            f(m->l2);
        }
        f(pool_cons);
        f(pool_var);
        f(pool_graph);
    }
    template <typename F>
    void visit_linears(F&& f) const {
        const_cast<GcnnParams*>(this)->visit_linears(
            [&](Linear& l) { f(const_cast<const Linear&>(l)); });
    }

    long parameter_count() const {
        long n = 0;
        visit_linears([&](const Linear& l) { n += l.W.size() + l.b.size(); });
        return n;
    }
};

inline Linear make_linear(int out, int in) {
    return {MatrixXd::Zero(out, in), VectorXd::Zero(out)};
}

inline GcnnParams make_zero_params(int hidden = kHidden) {
    GcnnParams p;
    p.cons_embed = {make_linear(hidden, kNumConsFeats), make_linear(hidden, hidden), true};
    p.var_embed = {make_linear(hidden, kNumVarFeats), make_linear(hidden, hidden), true};
    p.edge_embed = {make_linear(hidden, 1), make_linear(hidden, hidden), true};
    p.conv_cons_msg = {make_linear(hidden, 3 * hidden), make_linear(hidden, hidden), true};
    p.conv_cons_out = {make_linear(hidden, 2 * hidden), make_linear(hidden, hidden), true};
    p.conv_var_msg = {make_linear(hidden, 3 * hidden), make_linear(hidden, hidden), true};
    p.conv_var_out = {make_linear(hidden, 2 * hidden), make_linear(hidden, hidden), true};
    p.score_head = {make_linear(hidden, hidden), make_linear(1, hidden), false};
    p.pool_cons = make_linear(hidden, 2 * hidden);
    p.pool_var = make_linear(hidden, 2 * hidden);
    p.pool_graph = make_linear(hidden, 2 * hidden);
    p.cons_mean = VectorXd::Zero(kNumConsFeats);
    p.cons_std = VectorXd::Ones(kNumConsFeats);
    p.var_mean = VectorXd::Zero(kNumVarFeats);
    p.var_std = VectorXd::Ones(kNumVarFeats);
    p.edge_mean = VectorXd::Zero(1);
    p.edge_std = VectorXd::Ones(1);
    return p;
}

/// Orthogonal init (QR of a Gaussian matrix, sign-fixed on R's diagonal so
/// the result is a deterministic function of the seed), zero biases.
inline void init_params(GcnnParams& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    p.visit_linears([&](Linear& l) {
        const int rows = static_cast<int>(l.W.rows());
        const int cols = static_cast<int>(l.W.cols());
        const int n = std::max(rows, cols);
        MatrixXd G(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) G(i, j) = normal(rng);
        Eigen::HouseholderQR<MatrixXd> qr(G);
        MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
        MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int j = 0; j < n; ++j)
            if (R(j, j) < 0) Q.col(j) = -Q.col(j);
        l.W = Q.topLeftCorner(rows, cols);
        l.b.setZero();
    });
}

inline GcnnParams make_random_params(std::uint64_t seed, int hidden = kHidden) {
    GcnnParams p = make_zero_params(hidden);
    init_params(p, seed);
    return p;
}

// ---------------------------------------------------------------------------
// Forward

struct PolicyOutput {
    VectorXd logits;                 // one per candidate
    VectorXd probs;                  // masked softmax over candidates
    VectorXd graph_embedding;        // g, length hidden
    VectorXd normalized_embedding;   // g / ||g||
};

namespace detail {

struct Mlp2Cache {
    MatrixXd input;  // N x in
    MatrixXd pre1;   // N x hidden, before hidden ReLU
    MatrixXd pre2;   // N x out, before optional output ReLU
    MatrixXd out;
};

inline MatrixXd mlp2_forward(const Mlp2& m, const MatrixXd& X, Mlp2Cache& cache) {
    cache.input = X;
    cache.pre1 = (X * m.l1.W.transpose()).rowwise() + m.l1.b.transpose();
    MatrixXd a1 = cache.pre1.cwiseMax(0.0);
    cache.pre2 = (a1 * m.l2.W.transpose()).rowwise() + m.l2.b.transpose();
    cache.out = m.relu_out ? cache.pre2.cwiseMax(0.0) : cache.pre2;
    return cache.out;
}

/// Accumulates parameter grads into `g` and returns grad w.r.t. the input.
inline MatrixXd mlp2_backward(const Mlp2& m, const Mlp2Cache& cache,
                              MatrixXd dOut, Mlp2& g) {
    if (m.relu_out)
        dOut = dOut.cwiseProduct((cache.pre2.array() > 0.0).cast<double>().matrix());
    MatrixXd a1 = cache.pre1.cwiseMax(0.0);
    g.l2.W += dOut.transpose() * a1;
    g.l2.b += dOut.colwise().sum().transpose();
    MatrixXd dA1 = dOut * m.l2.W;
    MatrixXd dH1 =
        dA1.cwiseProduct((cache.pre1.array() > 0.0).cast<double>().matrix());
    g.l1.W += dH1.transpose() * cache.input;
    g.l1.b += dH1.colwise().sum().transpose();
    return dH1 * m.l1.W;
}

struct PoolCache {
    MatrixXd input;                 // nodes x hidden (post-conv features)
    std::vector<int> argmax;        // per column, first row attaining the max
    VectorXd pooled;                // 2*hidden concat(max, mean)
};

inline VectorXd pool_forward(const Linear& lin, const MatrixXd& X, PoolCache& cache) {
    const int h = static_cast<int>(X.cols());
    cache.input = X;
    cache.argmax.assign(h, -1);
    VectorXd pooled = VectorXd::Zero(2 * h);
    if (X.rows() == 0) {  // empty node set pools to zero
        cache.pooled = pooled;
        return lin.W * pooled + lin.b;
    }
    for (int k = 0; k < h; ++k) {
        int arg = 0;
        double best = X(0, k);
        for (int r = 1; r < X.rows(); ++r)
            if (X(r, k) > best) { best = X(r, k); arg = r; }
        cache.argmax[k] = arg;
        pooled[k] = best;
        pooled[h + k] = X.col(k).mean();
    }
    cache.pooled = pooled;
    return lin.W * pooled + lin.b;
}

inline MatrixXd pool_backward(const Linear& lin, const PoolCache& cache,
                              const VectorXd& dOut, Linear& g) {
    g.W += dOut * cache.pooled.transpose();
    g.b += dOut;
    VectorXd dPooled = lin.W.transpose() * dOut;
    const int h = static_cast<int>(cache.input.cols());
    const int n = static_cast<int>(cache.input.rows());
    MatrixXd dX = MatrixXd::Zero(n, h);
    if (n == 0) return dX;
    for (int k = 0; k < h; ++k) {
        dX(cache.argmax[k], k) += dPooled[k];
        dX.col(k).array() += dPooled[h + k] / static_cast<double>(n);
    }
    return dX;
}

}  // namespace detail

struct ForwardCache {
    // Standardized raw features.
    MatrixXd cons_in, var_in, edge_in;
    detail::Mlp2Cache cons_embed, var_embed, edge_embed;
    MatrixXd msg_c_in;  // E x 3h, inputs to g_C
    detail::Mlp2Cache conv_cons_msg;
    MatrixXd cons_upd_in;  // |C| x 2h
    detail::Mlp2Cache conv_cons_out;
    MatrixXd msg_v_in;  // E x 3h
    detail::Mlp2Cache conv_var_msg;
    MatrixXd var_upd_in;  // |V| x 2h
    detail::Mlp2Cache conv_var_out;
    detail::Mlp2Cache score;  // over candidate rows only
    detail::PoolCache pool_c, pool_v;
    VectorXd graph_in;  // 2h input to pool_graph
    VectorXd graph_embedding;
    VectorXd probs;
    std::vector<int> candidates;
};

inline PolicyOutput gcnn_forward(const GcnnParams& p, const BipartiteState& st,
                                 ForwardCache* cache_out = nullptr) {
    if (st.candidates.empty())
        throw std::invalid_argument("gcnn_forward: empty candidate list");
    const int nc = static_cast<int>(st.cons_feats.size());
    const int nv = static_cast<int>(st.var_feats.size());
    const int ne = static_cast<int>(st.edges.size());
    const int h = static_cast<int>(p.pool_cons.W.rows());

    ForwardCache local;
    ForwardCache& cc = cache_out ? *cache_out : local;
    cc.candidates = st.candidates;

    cc.cons_in.resize(nc, kNumConsFeats);
    for (int i = 0; i < nc; ++i)
        for (int k = 0; k < kNumConsFeats; ++k)
            cc.cons_in(i, k) = (st.cons_feats[i][k] - p.cons_mean[k]) / p.cons_std[k];
    cc.var_in.resize(nv, kNumVarFeats);
    for (int j = 0; j < nv; ++j)
        for (int k = 0; k < kNumVarFeats; ++k)
            cc.var_in(j, k) = (st.var_feats[j][k] - p.var_mean[k]) / p.var_std[k];
    cc.edge_in.resize(ne, 1);
    for (int e = 0; e < ne; ++e)
        cc.edge_in(e, 0) = (st.edges[e].coef - p.edge_mean[0]) / p.edge_std[0];

    MatrixXd C = detail::mlp2_forward(p.cons_embed, cc.cons_in, cc.cons_embed);
    MatrixXd V = detail::mlp2_forward(p.var_embed, cc.var_in, cc.var_embed);
    MatrixXd E = ne > 0 ? detail::mlp2_forward(p.edge_embed, cc.edge_in, cc.edge_embed)
                        : MatrixXd::Zero(0, h);

    // Constraint-side half-convolution.
    cc.msg_c_in.resize(ne, 3 * h);
    for (int e = 0; e < ne; ++e) {
        cc.msg_c_in.block(e, 0, 1, h) = C.row(st.edges[e].cons);
        cc.msg_c_in.block(e, h, 1, h) = V.row(st.edges[e].var);
        cc.msg_c_in.block(e, 2 * h, 1, h) = E.row(e);
    }
    MatrixXd msgs_c = ne > 0
        ? detail::mlp2_forward(p.conv_cons_msg, cc.msg_c_in, cc.conv_cons_msg)
        : MatrixXd::Zero(0, h);
    MatrixXd agg_c = MatrixXd::Zero(nc, h);
    for (int e = 0; e < ne; ++e) agg_c.row(st.edges[e].cons) += msgs_c.row(e);
    cc.cons_upd_in.resize(nc, 2 * h);
    cc.cons_upd_in << C, agg_c;
    MatrixXd C1 = detail::mlp2_forward(p.conv_cons_out, cc.cons_upd_in, cc.conv_cons_out);

    // Variable-side half-convolution, using the updated constraint features.
    cc.msg_v_in.resize(ne, 3 * h);
    for (int e = 0; e < ne; ++e) {
        cc.msg_v_in.block(e, 0, 1, h) = C1.row(st.edges[e].cons);
        cc.msg_v_in.block(e, h, 1, h) = V.row(st.edges[e].var);
        cc.msg_v_in.block(e, 2 * h, 1, h) = E.row(e);
    }
    MatrixXd msgs_v = ne > 0
        ? detail::mlp2_forward(p.conv_var_msg, cc.msg_v_in, cc.conv_var_msg)
        : MatrixXd::Zero(0, h);
    MatrixXd agg_v = MatrixXd::Zero(nv, h);
    for (int e = 0; e < ne; ++e) agg_v.row(st.edges[e].var) += msgs_v.row(e);
    cc.var_upd_in.resize(nv, 2 * h);
    cc.var_upd_in << V, agg_v;
    MatrixXd V1 = detail::mlp2_forward(p.conv_var_out, cc.var_upd_in, cc.conv_var_out);

    // Candidate scores and masked softmax.
    const int k = static_cast<int>(st.candidates.size());
    MatrixXd cand_feats(k, h);
    for (int i = 0; i < k; ++i) cand_feats.row(i) = V1.row(st.candidates[i]);
    MatrixXd logits_m = detail::mlp2_forward(p.score_head, cand_feats, cc.score);
    VectorXd logits = logits_m.col(0);
    double mx = logits.maxCoeff();
    VectorXd ex = (logits.array() - mx).exp();
    VectorXd probs = ex / ex.sum();
    cc.probs = probs;

    // Graph-level embedding.
    VectorXd cg = detail::pool_forward(p.pool_cons, C1, cc.pool_c);
    VectorXd vg = detail::pool_forward(p.pool_var, V1, cc.pool_v);
    cc.graph_in.resize(2 * h);
    cc.graph_in << cg, vg;
    VectorXd g = p.pool_graph.W * cc.graph_in + p.pool_graph.b;
    cc.graph_embedding = g;

    PolicyOutput out;
    out.logits = logits;
    out.probs = probs;
    out.graph_embedding = g;
    double gn = g.norm();
    out.normalized_embedding = gn > 0 ? VectorXd(g / gn) : g;
    return out;
}

/// Reverse pass. d_logits is the loss gradient w.r.t. the candidate logits,
/// d_graph w.r.t. the *unnormalized* graph embedding; either may be empty.
/// Parameter gradients accumulate into `grads`.
inline void gcnn_backward(const GcnnParams& p, const BipartiteState& st,
                          const ForwardCache& cc, const VectorXd& d_logits,
                          const VectorXd& d_graph, GcnnParams& grads) {
    const int nc = static_cast<int>(st.cons_feats.size());
    const int nv = static_cast<int>(st.var_feats.size());
    const int ne = static_cast<int>(st.edges.size());
    const int h = static_cast<int>(p.pool_cons.W.rows());
    const int k = static_cast<int>(cc.candidates.size());

    MatrixXd dV1 = MatrixXd::Zero(nv, h);
    MatrixXd dC1 = MatrixXd::Zero(nc, h);

    if (d_logits.size() > 0) {
        MatrixXd dLogits(k, 1);
        dLogits.col(0) = d_logits;
        MatrixXd dCand = detail::mlp2_backward(p.score_head, cc.score, dLogits,
                                               grads.score_head);
        for (int i = 0; i < k; ++i) dV1.row(cc.candidates[i]) += dCand.row(i);
    }

    if (d_graph.size() > 0) {
        grads.pool_graph.W += d_graph * cc.graph_in.transpose();
        grads.pool_graph.b += d_graph;
        VectorXd dGraphIn = p.pool_graph.W.transpose() * d_graph;
        dC1 += detail::pool_backward(p.pool_cons, cc.pool_c, dGraphIn.head(h),
                                     grads.pool_cons);
        dV1 += detail::pool_backward(p.pool_var, cc.pool_v, dGraphIn.tail(h),
                                     grads.pool_var);
    }

    MatrixXd dV = MatrixXd::Zero(nv, h);
    MatrixXd dE = MatrixXd::Zero(ne, h);

    // Variable-side conv backward.
    MatrixXd dVarUpdIn = detail::mlp2_backward(p.conv_var_out, cc.conv_var_out, dV1,
                                               grads.conv_var_out);
    dV += dVarUpdIn.leftCols(h);
    MatrixXd dAggV = dVarUpdIn.rightCols(h);
    if (ne > 0) {
        MatrixXd dMsgsV(ne, h);
        for (int e = 0; e < ne; ++e) dMsgsV.row(e) = dAggV.row(st.edges[e].var);
        MatrixXd dMsgVIn = detail::mlp2_backward(p.conv_var_msg, cc.conv_var_msg,
                                                 dMsgsV, grads.conv_var_msg);
        for (int e = 0; e < ne; ++e) {
            dC1.row(st.edges[e].cons) += dMsgVIn.block(e, 0, 1, h);
            dV.row(st.edges[e].var) += dMsgVIn.block(e, h, 1, h);
            dE.row(e) += dMsgVIn.block(e, 2 * h, 1, h);
        }
    }

    // Constraint-side conv backward.
    MatrixXd dC = MatrixXd::Zero(nc, h);
    MatrixXd dConsUpdIn = detail::mlp2_backward(p.conv_cons_out, cc.conv_cons_out, dC1,
                                                grads.conv_cons_out);
    dC += dConsUpdIn.leftCols(h);
    MatrixXd dAggC = dConsUpdIn.rightCols(h);
    if (ne > 0) {
        MatrixXd dMsgsC(ne, h);
        for (int e = 0; e < ne; ++e) dMsgsC.row(e) = dAggC.row(st.edges[e].cons);
        MatrixXd dMsgCIn = detail::mlp2_backward(p.conv_cons_msg, cc.conv_cons_msg,
                                                 dMsgsC, grads.conv_cons_msg);
        for (int e = 0; e < ne; ++e) {
            dC.row(st.edges[e].cons) += dMsgCIn.block(e, 0, 1, h);
            dV.row(st.edges[e].var) += dMsgCIn.block(e, h, 1, h);
            dE.row(e) += dMsgCIn.block(e, 2 * h, 1, h);
        }
    }

    detail::mlp2_backward(p.cons_embed, cc.cons_embed, dC, grads.cons_embed);
    detail::mlp2_backward(p.var_embed, cc.var_embed, dV, grads.var_embed);
    if (ne > 0)
        detail::mlp2_backward(p.edge_embed, cc.edge_embed, dE, grads.edge_embed);
}

// ---------------------------------------------------------------------------
// Flat parameter view (Adam, finite differences, serialization)

inline std::vector<double> flatten(const GcnnParams& p) {
    std::vector<double> out;
    p.visit_linears([&](const Linear& l) {
        out.insert(out.end(), l.W.data(), l.W.data() + l.W.size());
        out.insert(out.end(), l.b.data(), l.b.data() + l.b.size());
    });
    return out;
}

inline void unflatten(GcnnParams& p, const std::vector<double>& flat) {
    std::size_t pos = 0;
    p.visit_linears([&](Linear& l) {
        std::copy(flat.begin() + pos, flat.begin() + pos + l.W.size(), l.W.data());
        pos += l.W.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + l.b.size(), l.b.data());
        pos += l.b.size();
    });
    if (pos != flat.size())
        throw std::invalid_argument("flat parameter vector has wrong length");
}

inline void save_model(const GcnnParams& p, const std::string& path) {
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["hidden"] = static_cast<int>(p.pool_cons.W.rows());
    auto vec = [](const VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["cons_mean"] = vec(p.cons_mean);
    j["cons_std"] = vec(p.cons_std);
    j["var_mean"] = vec(p.var_mean);
    j["var_std"] = vec(p.var_std);
    j["edge_mean"] = vec(p.edge_mean);
    j["edge_std"] = vec(p.edge_std);
    j["weights"] = flatten(p);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << j.dump() << '\n';
}

inline GcnnParams load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    f >> j;
    if (j.at("schema").get<std::string>() != kModelSchema)
        throw std::runtime_error("unsupported model schema");
    GcnnParams p = make_zero_params(j.at("hidden").get<int>());
    auto vec = [&](const char* key) {
        auto v = j.at(key).get<std::vector<double>>();
        return Eigen::Map<const VectorXd>(v.data(), v.size()).eval();
    };
    p.cons_mean = vec("cons_mean");
    p.cons_std = vec("cons_std");
    p.var_mean = vec("var_mean");
    p.var_std = vec("var_std");
    p.edge_mean = vec("edge_mean");
    p.edge_std = vec("edge_std");
    unflatten(p, j.at("weights").get<std::vector<double>>());
    return p;
}

}  // namespace camlab
