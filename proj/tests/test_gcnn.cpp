#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "camlab/gcnn.hpp"
#include "camlab/instgen.hpp"

using namespace camlab;

namespace {

BipartiteState sample_state(std::uint64_t seed) {
    MilpInstance m = instgen::gen_set_cover(6, 8, 0.35, seed);
    LpResult lp = solve_lp(m);
    REQUIRE(lp.status == LpStatus::Optimal);
    EncodeContext ctx;
    ctx.note_lp_solve();
    BipartiteState st = encode_state(m, lp, ctx);
    if (st.candidates.empty()) st.candidates = {0, 1};  // force a candidate set
    return st;
}

/// Scalar probe loss L = w.logits + u.normalized_embedding, which exercises
/// both network heads including the embedding normalization.
double probe_loss(const GcnnParams& p, const BipartiteState& st, const VectorXd& w,
                  const VectorXd& u) {
    PolicyOutput out = gcnn_forward(p, st);
    return w.dot(out.logits) + u.dot(out.normalized_embedding);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
    const int h = 8;  // small width keeps the FD sweep fast
    GcnnParams p = make_zero_params(h);
    init_params(p, 31);
    BipartiteState st = sample_state(41);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    VectorXd w(st.candidates.size()), u(h);
    for (int i = 0; i < w.size(); ++i) w[i] = g(rng);
    for (int i = 0; i < h; ++i) u[i] = g(rng);

    ForwardCache cache;
    PolicyOutput out = gcnn_forward(p, st, &cache);
    // d/d(graph) of u.(g/|g|): project out the radial component.
    double gn = out.graph_embedding.norm();
    VectorXd gt = out.graph_embedding / gn;
    VectorXd d_graph = (u - gt * gt.dot(u)) / gn;
    GcnnParams grads = make_zero_params(h);
    gcnn_backward(p, st, cache, w, d_graph, grads);

    std::vector<double> theta = flatten(p);
    std::vector<double> analytic = flatten(grads);
    REQUIRE(theta.size() == analytic.size());

    // >= 3 probes in every weight group: walk the flat vector group by group.
    std::vector<std::size_t> sizes;
    p.visit_linears([&](const Linear& l) {
        sizes.push_back(static_cast<std::size_t>(l.W.size() + l.b.size()));
    });
    const double fd_h = 1e-5;
    std::size_t offset = 0;
    int checked = 0;
    std::uniform_int_distribution<std::size_t> pickd;
    for (std::size_t group = 0; group < sizes.size(); ++group) {
        for (int probe = 0; probe < 3; ++probe) {
            std::size_t idx =
                offset + std::uniform_int_distribution<std::size_t>(
                             0, sizes[group] - 1)(rng);
            GcnnParams pp = p;
            std::vector<double> tp = theta;
            tp[idx] += fd_h;
            unflatten(pp, tp);
            double up_val = probe_loss(pp, st, w, u);
            tp[idx] = theta[idx] - fd_h;
            unflatten(pp, tp);
            double dn_val = probe_loss(pp, st, w, u);
            double fd = (up_val - dn_val) / (2 * fd_h);
            double denom = std::max({std::abs(fd), std::abs(analytic[idx]), 1e-6});
            CHECK(std::abs(fd - analytic[idx]) / denom <= 1e-4);
            ++checked;
        }
        offset += sizes[group];
    }
    CHECK(checked >= 20);
}

TEST_CASE("probabilities are a masked softmax over the candidates") {
    GcnnParams p = make_random_params(3);
    BipartiteState st = sample_state(55);
    PolicyOutput out = gcnn_forward(p, st);
    CHECK(out.probs.size() == static_cast<long>(st.candidates.size()));
    CHECK(out.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < out.probs.size(); ++i) CHECK(out.probs[i] > 0.0);
    // Softmax consistency with the logits.
    for (int i = 1; i < out.probs.size(); ++i)
        CHECK(std::log(out.probs[i] / out.probs[0]) ==
              doctest::Approx(out.logits[i] - out.logits[0]).epsilon(1e-9));
    CHECK(out.normalized_embedding.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(
        [&] {
            BipartiteState empty = st;
            empty.candidates.clear();
            gcnn_forward(p, empty);
        }(),
        std::invalid_argument);
}

TEST_CASE("constraint permutation leaves the outputs unchanged") {
    GcnnParams p = make_random_params(9);
    BipartiteState st = sample_state(77);
    PolicyOutput base = gcnn_forward(p, st);

    // Reverse the constraint order, rewiring edges accordingly.
    BipartiteState perm = st;
    const int nc = static_cast<int>(st.cons_feats.size());
    for (int i = 0; i < nc; ++i) perm.cons_feats[i] = st.cons_feats[nc - 1 - i];
    for (auto& e : perm.edges) e.cons = nc - 1 - e.cons;
    PolicyOutput out = gcnn_forward(p, perm);

    for (int i = 0; i < base.logits.size(); ++i)
        CHECK(out.logits[i] == doctest::Approx(base.logits[i]).epsilon(1e-9));
    for (int i = 0; i < base.graph_embedding.size(); ++i)
        CHECK(out.graph_embedding[i] ==
              doctest::Approx(base.graph_embedding[i]).epsilon(1e-9));
}

TEST_CASE("orthogonal init and deterministic seeding") {
    GcnnParams a = make_random_params(123), b = make_random_params(123);
    CHECK(flatten(a) == flatten(b));
    GcnnParams c = make_random_params(124);
    CHECK(flatten(a) != flatten(c));
    // The 64x5 embedding matrix is a slice of an orthogonal matrix: its
    // columns form an orthonormal set.
    MatrixXd WWt = a.cons_embed.l1.W.transpose() * a.cons_embed.l1.W;
    for (int i = 0; i < WWt.rows(); ++i)
        for (int j = 0; j < WWt.cols(); ++j)
            CHECK(WWt(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("parameter count matches the architecture") {
    GcnnParams p = make_zero_params();
    // Embeddings 5/19/1 -> 64 -> 64, four conv MLPs, score head, three pools.
    long expect = 0;
    auto mlp = [](long in, long hid, long out) {
        return in * hid + hid + hid * out + out;
    };
    expect += mlp(5, 64, 64) + mlp(19, 64, 64) + mlp(1, 64, 64);
    expect += 2 * mlp(192, 64, 64) + 2 * mlp(128, 64, 64);
    expect += mlp(64, 64, 1);
    expect += 3 * (128 * 64 + 64);
    CHECK(p.parameter_count() == expect);
}

TEST_CASE("model artifact round-trips bitwise") {
    GcnnParams p = make_random_params(7);
    p.cons_mean.setConstant(0.25);
    p.var_std.setConstant(3.5);
    auto path = (std::filesystem::temp_directory_path() / "camlab_model_rt.json").string();
    save_model(p, path);
    GcnnParams q = load_model(path);
    std::filesystem::remove(path);
    CHECK(flatten(p) == flatten(q));
    CHECK(p.cons_mean == q.cons_mean);
    CHECK(p.var_std == q.var_std);
    BipartiteState st = sample_state(91);
    CHECK(gcnn_forward(p, st).logits == gcnn_forward(q, st).logits);
}

TEST_CASE("flatten/unflatten round trip and length check") {
    GcnnParams p = make_random_params(11);
    auto flat = flatten(p);
    GcnnParams q = make_zero_params();
    unflatten(q, flat);
    CHECK(flatten(q) == flat);
    flat.pop_back();
    CHECK_THROWS_AS(unflatten(q, flat), std::invalid_argument);
}
