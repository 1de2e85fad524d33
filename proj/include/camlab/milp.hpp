#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace camlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One nonzero of the constraint matrix.
struct MatrixEntry {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// A MILP in the canonical form
///   min c'x + objective_constant   s.t.  Ax <= b,  l <= x <= u,
///   x_j integral wherever integer_mask[j] is set.
/// Bounds may be +-infinity. Instances are immutable once built; all
/// transformations return fresh copies.
struct MilpInstance {
    int n_vars = 0;
    int n_cons = 0;
    std::vector<double> objective;        // c, length n_vars
    std::vector<MatrixEntry> matrix;      // A, coordinate list
    std::vector<double> rhs;              // b, length n_cons
    std::vector<double> lower;            // l, -inf allowed
    std::vector<double> upper;            // u, +inf allowed
    std::vector<bool> integer_mask;
    double objective_constant = 0.0;
    std::string label;
};

struct ShiftVector {
    std::vector<double> s;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const {
        std::string out;
        for (const auto& v : violations) { out += v; out += '\n'; }
        return out;
    }
};

inline ValidationReport validate(const MilpInstance& m) {
    ValidationReport rep;
    auto fail = [&](const std::string& s) { rep.violations.push_back(s); };
    if (m.n_vars <= 0) fail("n_vars must be positive");
    if (m.n_cons < 0) fail("n_cons must be nonnegative");
    auto check_len = [&](std::size_t got, std::size_t want, const char* name) {
        if (got != want) fail(std::string(name) + " has length " + std::to_string(got) +
                              ", expected " + std::to_string(want));
    };
    check_len(m.objective.size(), static_cast<std::size_t>(m.n_vars), "objective");
    check_len(m.lower.size(), static_cast<std::size_t>(m.n_vars), "lower");
    check_len(m.upper.size(), static_cast<std::size_t>(m.n_vars), "upper");
    check_len(m.integer_mask.size(), static_cast<std::size_t>(m.n_vars), "integer_mask");
    check_len(m.rhs.size(), static_cast<std::size_t>(m.n_cons), "rhs");
    if (!rep.ok()) return rep;

    for (int j = 0; j < m.n_vars; ++j) {
        if (m.lower[j] > m.upper[j])
            fail("bound crossing at index " + std::to_string(j));
        if (std::isnan(m.lower[j]) || std::isnan(m.upper[j]))
            fail("NaN bound at index " + std::to_string(j));
    }
    for (int j = 0; j < m.n_vars; ++j)
        if (!std::isfinite(m.objective[j]))
            fail("non-finite objective coefficient at index " + std::to_string(j));
    for (int i = 0; i < m.n_cons; ++i)
        if (!std::isfinite(m.rhs[i]))
            fail("non-finite rhs at row " + std::to_string(i));
    if (!std::isfinite(m.objective_constant)) fail("objective_constant not finite");

    std::vector<std::vector<int>> seen(m.n_cons);
    for (const auto& e : m.matrix) {
        if (e.row < 0 || e.row >= m.n_cons || e.col < 0 || e.col >= m.n_vars) {
            fail("matrix entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                 ") out of range");
            continue;
        }
        if (!std::isfinite(e.value))
            fail("non-finite matrix entry at (" + std::to_string(e.row) + "," +
                 std::to_string(e.col) + ")");
        for (int c : seen[e.row])
            if (c == e.col)
                fail("duplicate matrix entry at (" + std::to_string(e.row) + "," +
                     std::to_string(e.col) + ")");
        seen[e.row].push_back(e.col);
    }
    return rep;
}

/// x_hat = x + s: rhs' = As + b, bounds shift, objective constant absorbs -c's.
/// Infinite bounds stay infinite.
inline MilpInstance shift_instance(const MilpInstance& m, const ShiftVector& sv) {
    if (static_cast<int>(sv.s.size()) != m.n_vars)
        throw std::invalid_argument("shift vector length mismatch");
    for (int j = 0; j < m.n_vars; ++j) {
        if (!std::isfinite(sv.s[j])) throw std::invalid_argument("non-finite shift entry");
        if (m.integer_mask[j] && sv.s[j] != std::floor(sv.s[j]))
            throw std::invalid_argument("non-integer shift on integer variable " +
                                        std::to_string(j));
    }
    MilpInstance out = m;
    for (const auto& e : m.matrix) out.rhs[e.row] += e.value * sv.s[e.col];
    for (int j = 0; j < m.n_vars; ++j) {
        if (std::isfinite(out.lower[j])) out.lower[j] += sv.s[j];
        if (std::isfinite(out.upper[j])) out.upper[j] += sv.s[j];
        out.objective_constant -= m.objective[j] * sv.s[j];
    }
    return out;
}

inline ShiftVector negate(const ShiftVector& sv) {
    ShiftVector out = sv;
    for (auto& v : out.s) v = -v;
    return out;
}

/// Uniform symmetric shift: integers in [-ceil(mag), ceil(mag)] for integer
/// variables, reals in [-mag, mag] otherwise. The distribution is our choice;
/// see the gen docs.
inline ShiftVector sample_shift(const MilpInstance& m, double magnitude, std::mt19937_64& rng) {
    if (!(magnitude > 0)) throw std::invalid_argument("magnitude must be positive");
    ShiftVector sv;
    sv.s.resize(m.n_vars);
    const long span = static_cast<long>(std::ceil(magnitude));
    for (int j = 0; j < m.n_vars; ++j) {
        if (m.integer_mask[j]) {
            std::uniform_int_distribution<long> d(-span, span);
            sv.s[j] = static_cast<double>(d(rng));
        } else {
            std::uniform_real_distribution<double> d(-magnitude, magnitude);
            sv.s[j] = d(rng);
        }
    }
    return sv;
}

/// The LP relaxation is the same data with integrality ignored. Solvers take
/// this view; nothing is copied beyond the mask reset.
inline MilpInstance lp_relaxation(const MilpInstance& m) {
    MilpInstance out = m;
    std::fill(out.integer_mask.begin(), out.integer_mask.end(), false);
    return out;
}

// ---------------------------------------------------------------------------
// Instance file format: one JSON object per file. null encodes an infinite
// bound. Finite doubles round-trip exactly.

inline constexpr const char* kInstanceSchema = "milp-v1";

inline nlohmann::json instance_to_json(const MilpInstance& m) {
    nlohmann::json j;
    j["schema"] = kInstanceSchema;
    j["n_vars"] = m.n_vars;
    j["n_cons"] = m.n_cons;
    j["objective"] = m.objective;
    j["rhs"] = m.rhs;
    auto bound_array = [](const std::vector<double>& v, double inf_sign) {
        nlohmann::json a = nlohmann::json::array();
        for (double x : v) {
            if (std::isinf(x) && x * inf_sign > 0) a.push_back(nullptr);
            else a.push_back(x);
        }
        return a;
    };
    j["lower"] = bound_array(m.lower, -1.0);
    j["upper"] = bound_array(m.upper, +1.0);
    j["integer_mask"] = std::vector<int>(m.integer_mask.begin(), m.integer_mask.end());
    nlohmann::json mat = nlohmann::json::array();
    for (const auto& e : m.matrix) mat.push_back({e.row, e.col, e.value});
    j["matrix"] = mat;
    j["objective_constant"] = m.objective_constant;
    j["label"] = m.label;
    return j;
}

inline MilpInstance instance_from_json(const nlohmann::json& j) {
    if (j.contains("schema") && j.at("schema").get<std::string>() != kInstanceSchema)
        throw std::runtime_error("unsupported instance schema: " +
                                 j.at("schema").get<std::string>());
    MilpInstance m;
    m.n_vars = j.at("n_vars").get<int>();
    m.n_cons = j.at("n_cons").get<int>();
    m.objective = j.at("objective").get<std::vector<double>>();
    m.rhs = j.at("rhs").get<std::vector<double>>();
    auto bounds = [](const nlohmann::json& a, double inf_val) {
        std::vector<double> v;
        v.reserve(a.size());
        for (const auto& x : a) v.push_back(x.is_null() ? inf_val : x.get<double>());
        return v;
    };
    m.lower = bounds(j.at("lower"), -kInf);
    m.upper = bounds(j.at("upper"), +kInf);
    for (int b : j.at("integer_mask").get<std::vector<int>>()) m.integer_mask.push_back(b != 0);
    for (const auto& e : j.at("matrix"))
        m.matrix.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
    m.objective_constant = j.at("objective_constant").get<double>();
    m.label = j.value("label", std::string{});
    return m;
}

inline void save_instance(const MilpInstance& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << instance_to_json(m).dump() << '\n';
}

inline MilpInstance load_instance(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    f >> j;
    return instance_from_json(j);
}

/// Dense row of A; used by the encoder and a few diagnostics.
inline std::vector<std::vector<double>> dense_rows(const MilpInstance& m) {
    std::vector<std::vector<double>> rows(m.n_cons, std::vector<double>(m.n_vars, 0.0));
    for (const auto& e : m.matrix) rows[e.row][e.col] = e.value;
    return rows;
}

inline bool instances_equal(const MilpInstance& a, const MilpInstance& b) {
    if (a.n_vars != b.n_vars || a.n_cons != b.n_cons) return false;
    if (a.objective != b.objective || a.rhs != b.rhs) return false;
    if (a.lower != b.lower || a.upper != b.upper) return false;
    if (a.integer_mask != b.integer_mask) return false;
    if (a.objective_constant != b.objective_constant) return false;
    if (a.matrix.size() != b.matrix.size()) return false;
    for (std::size_t i = 0; i < a.matrix.size(); ++i) {
        if (a.matrix[i].row != b.matrix[i].row || a.matrix[i].col != b.matrix[i].col ||
            a.matrix[i].value != b.matrix[i].value)
            return false;
    }
    return true;
}

}  // namespace camlab
