#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "camlab/milp.hpp"

namespace camlab {

/// Desk-scale generators for the four benchmark families. All constraints are
/// emitted in <= form; >=-rows are negated and equalities become <=-pairs.
/// Identical parameters and seed give byte-identical instances.
namespace instgen {

/// min sum x_j, cover each row: -sum_{j in row} x_j <= -1, x binary.
/// Membership Bernoulli(density); empty rows are patched with one random
/// column so every instance is feasible.
inline MilpInstance gen_set_cover(int rows, int cols, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MilpInstance m;
    m.n_vars = cols;
    m.n_cons = rows;
    m.objective.assign(cols, 1.0);
    m.rhs.assign(rows, -1.0);
    m.lower.assign(cols, 0.0);
    m.upper.assign(cols, 1.0);
    m.integer_mask.assign(cols, true);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, cols - 1);
    for (int i = 0; i < rows; ++i) {
        std::vector<bool> member(cols, false);
        bool any = false;
        for (int j = 0; j < cols; ++j) {
            if (coin(rng) < density) { member[j] = true; any = true; }
        }
        if (!any) member[pick(rng)] = true;
        for (int j = 0; j < cols; ++j)
            if (member[j]) m.matrix.push_back({i, j, -1.0});
    }
    m.label = "setcover-r" + std::to_string(rows) + "-c" + std::to_string(cols) +
              "-d" + std::to_string(density) + "-s" + std::to_string(seed);
    return m;
}

/// Winner determination: min -sum b_i x_i, per-item conflict rows
/// sum_{bids containing item} x_i <= 1. Bundles are uniform size in
/// [1, min(4, items)], price = size * U(0.5, 1.5).
inline MilpInstance gen_comb_auction(int items, int bids, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MilpInstance m;
    m.n_vars = bids;
    m.n_cons = items;
    m.objective.assign(bids, 0.0);
    m.rhs.assign(items, 1.0);
    m.lower.assign(bids, 0.0);
    m.upper.assign(bids, 1.0);
    m.integer_mask.assign(bids, true);
    std::uniform_int_distribution<int> bundle_size(1, std::min(4, items));
    std::uniform_int_distribution<int> pick(0, items - 1);
    std::uniform_real_distribution<double> unit_price(0.5, 1.5);
    std::vector<std::vector<bool>> item_bids(items, std::vector<bool>(bids, false));
    for (int i = 0; i < bids; ++i) {
        int size = bundle_size(rng);
        std::vector<bool> in(items, false);
        int chosen = 0;
        while (chosen < size) {
            int it = pick(rng);
            if (!in[it]) { in[it] = true; ++chosen; }
        }
        m.objective[i] = -static_cast<double>(size) * unit_price(rng);
        for (int it = 0; it < items; ++it)
            if (in[it]) item_bids[it][i] = true;
    }
    for (int it = 0; it < items; ++it)
        for (int i = 0; i < bids; ++i)
            if (item_bids[it][i]) m.matrix.push_back({it, i, 1.0});
    m.label = "auction-i" + std::to_string(items) + "-b" + std::to_string(bids) +
              "-s" + std::to_string(seed);
    return m;
}

/// Capacitated facility location. Variables: x_i binary (open facility),
/// y_ij in [0,1] continuous (fraction of demand j served by i). Assignment
/// equalities encoded as <=-pairs; capacities patched so total capacity
/// covers total demand (open-everything is always feasible).
inline MilpInstance gen_cap_facility(int n_facilities, int n_customers, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int nf = n_facilities, nc = n_customers;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> fx(nf), fy(nf), cx(nc), cy(nc);
    for (int i = 0; i < nf; ++i) { fx[i] = unit(rng); fy[i] = unit(rng); }
    for (int j = 0; j < nc; ++j) { cx[j] = unit(rng); cy[j] = unit(rng); }
    std::vector<double> demand(nc), capacity(nf), open_cost(nf);
    double total_demand = 0.0;
    std::uniform_real_distribution<double> dem(1.0, 5.0);
    std::uniform_real_distribution<double> opc(1.0, 3.0);
    for (int j = 0; j < nc; ++j) { demand[j] = std::floor(dem(rng) * 10) / 10; total_demand += demand[j]; }
    for (int i = 0; i < nf; ++i) open_cost[i] = std::floor(opc(rng) * 10) / 10;
    std::uniform_real_distribution<double> cap(0.5, 1.5);
    for (int i = 0; i < nf; ++i)
        capacity[i] = std::ceil(cap(rng) * total_demand * 2.0 / nf * 10) / 10;

    MilpInstance m;
    // Variable order: x_0..x_{nf-1}, then y_ij row-major by facility.
    m.n_vars = nf + nf * nc;
    m.n_cons = 2 * nc + nf;
    m.objective.assign(m.n_vars, 0.0);
    m.lower.assign(m.n_vars, 0.0);
    m.upper.assign(m.n_vars, 1.0);
    m.integer_mask.assign(m.n_vars, false);
    for (int i = 0; i < nf; ++i) {
        m.integer_mask[i] = true;
        m.objective[i] = open_cost[i];
    }
    auto yvar = [&](int i, int j) { return nf + i * nc + j; };
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nc; ++j) {
            double dx = fx[i] - cx[j], dy = fy[i] - cy[j];
            m.objective[yvar(i, j)] =
                std::floor(std::sqrt(dx * dx + dy * dy) * demand[j] * 100) / 100;
        }
    m.rhs.assign(m.n_cons, 0.0);
    // Rows 0..nc-1:  sum_i y_ij <= 1; rows nc..2nc-1: -sum_i y_ij <= -1.
    for (int j = 0; j < nc; ++j) {
        m.rhs[j] = 1.0;
        m.rhs[nc + j] = -1.0;
        for (int i = 0; i < nf; ++i) {
            m.matrix.push_back({j, yvar(i, j), 1.0});
            m.matrix.push_back({nc + j, yvar(i, j), -1.0});
        }
    }
    // Capacity rows: sum_j d_j y_ij - u_i x_i <= 0.
    for (int i = 0; i < nf; ++i) {
        int row = 2 * nc + i;
        m.matrix.push_back({row, i, -capacity[i]});
        for (int j = 0; j < nc; ++j) m.matrix.push_back({row, yvar(i, j), demand[j]});
    }
    m.label = "facility-f" + std::to_string(nf) + "-c" + std::to_string(nc) +
              "-s" + std::to_string(seed);
    return m;
}

/// Maximum independent set on an Erdos-Renyi graph: min -sum x_v with
/// x_u + x_v <= 1 per edge. Isolated-edge-free graphs simply have fewer rows.
inline MilpInstance gen_max_ind_set(int n_nodes, double edge_prob, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MilpInstance m;
    m.n_vars = n_nodes;
    m.objective.assign(n_nodes, -1.0);
    m.lower.assign(n_nodes, 0.0);
    m.upper.assign(n_nodes, 1.0);
    m.integer_mask.assign(n_nodes, true);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    int row = 0;
    for (int u = 0; u < n_nodes; ++u)
        for (int v = u + 1; v < n_nodes; ++v)
            if (coin(rng) < edge_prob) {
                m.matrix.push_back({row, u, 1.0});
                m.matrix.push_back({row, v, 1.0});
                m.rhs.push_back(1.0);
                ++row;
            }
    m.n_cons = row;
    m.label = "mis-n" + std::to_string(n_nodes) + "-p" + std::to_string(edge_prob) +
              "-s" + std::to_string(seed);
    return m;
}

enum class Family { SetCover, CombAuction, FacilityLocation, MaxIndepSet };

/// Desk-scale defaults used by the pipeline and the verification suites.
inline MilpInstance gen_default(Family f, std::uint64_t seed) {
    switch (f) {
        case Family::SetCover: return gen_set_cover(30, 40, 0.15, seed);
        case Family::CombAuction: return gen_comb_auction(20, 40, seed);
        case Family::FacilityLocation: return gen_cap_facility(5, 10, seed);
        case Family::MaxIndepSet: return gen_max_ind_set(25, 0.15, seed);
    }
    throw std::invalid_argument("unknown family");
}

inline Family family_from_string(const std::string& s) {
    if (s == "setcover") return Family::SetCover;
    if (s == "auction") return Family::CombAuction;
    if (s == "facility") return Family::FacilityLocation;
    if (s == "mis") return Family::MaxIndepSet;
    throw std::invalid_argument("unknown family: " + s);
}

}  // namespace instgen
}  // namespace camlab
