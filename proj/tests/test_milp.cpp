#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "camlab/milp.hpp"

using namespace camlab;

namespace {

MilpInstance small_instance() {
    // min -2x0 - 3x1  s.t.  x0 + 2x1 <= 4,  3x0 + x1 <= 6,  0 <= x <= 3,
    // x0 integer.
    MilpInstance m;
    m.n_vars = 2;
    m.n_cons = 2;
    m.objective = {-2.0, -3.0};
    m.matrix = {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 1, 1.0}};
    m.rhs = {4.0, 6.0};
    m.lower = {0.0, 0.0};
    m.upper = {3.0, 3.0};
    m.integer_mask = {true, false};
    m.label = "small";
    return m;
}

}  // namespace

TEST_CASE("validate accepts a well-formed instance") {
    CHECK(validate(small_instance()).ok());
}

TEST_CASE("validate reports named violations") {
    MilpInstance m = small_instance();
    m.objective.pop_back();
    auto rep = validate(m);
    CHECK_FALSE(rep.ok());
    CHECK(rep.to_string().find("objective") != std::string::npos);

    m = small_instance();
    m.matrix.push_back({5, 0, 1.0});
    CHECK_FALSE(validate(m).ok());

    m = small_instance();
    m.lower[0] = 2.0;
    m.upper[0] = 1.0;
    CHECK_FALSE(validate(m).ok());
}

TEST_CASE("shift_instance applies the augmentation map") {
    MilpInstance m = small_instance();
    ShiftVector s{{2.0, -1.0}};
    MilpInstance a = shift_instance(m, s);

    // rhs' = A s + b; exact because everything is integer-valued.
    CHECK(a.rhs[0] == 4.0 + 1.0 * 2.0 + 2.0 * -1.0);
    CHECK(a.rhs[1] == 6.0 + 3.0 * 2.0 + 1.0 * -1.0);
    // Bounds shift, matrix and objective unchanged.
    CHECK(a.lower[0] == 2.0);
    CHECK(a.upper[0] == 5.0);
    CHECK(a.lower[1] == -1.0);
    CHECK(a.objective == m.objective);
    CHECK(a.matrix.size() == m.matrix.size());
    // objective_constant' = constant - c's keeps objective values aligned:
    // c'(x+s) + constant' = c'x + constant.
    CHECK(a.objective_constant == 0.0 - (-2.0 * 2.0 + -3.0 * -1.0));
}

TEST_CASE("shift then inverse shift round-trips on integer data") {
    MilpInstance m = small_instance();
    ShiftVector s{{3.0, -2.0}};
    MilpInstance back = shift_instance(shift_instance(m, s), negate(s));
    CHECK(instances_equal(m, back));
}

TEST_CASE("shift_instance leaves infinite bounds infinite") {
    MilpInstance m = small_instance();
    m.upper[1] = kInf;
    MilpInstance a = shift_instance(m, ShiftVector{{1.0, 5.0}});
    CHECK(a.upper[1] == kInf);
    CHECK(a.lower[1] == 5.0);
}

TEST_CASE("shift_instance rejects bad shifts") {
    MilpInstance m = small_instance();
    CHECK_THROWS_AS(shift_instance(m, ShiftVector{{1.0}}), std::invalid_argument);
    // Non-integer shift on an integer variable breaks integrality.
    CHECK_THROWS_AS(shift_instance(m, ShiftVector{{0.5, 0.0}}), std::invalid_argument);
}

TEST_CASE("sample_shift respects integrality and magnitude") {
    MilpInstance m = small_instance();
    std::mt19937_64 rng(11);
    for (int it = 0; it < 50; ++it) {
        ShiftVector s = sample_shift(m, 10.0, rng);
        REQUIRE(s.s.size() == 2);
        CHECK(s.s[0] == std::floor(s.s[0]));  // integer var gets integer shift
        CHECK(std::abs(s.s[0]) <= 10.0);
        CHECK(std::abs(s.s[1]) <= 10.0);
    }
    // Deterministic per seed.
    std::mt19937_64 r1(5), r2(5);
    CHECK(sample_shift(m, 10.0, r1).s == sample_shift(m, 10.0, r2).s);
}

TEST_CASE("JSON round trip is exact, including infinite bounds") {
    MilpInstance m = small_instance();
    m.upper[1] = kInf;
    m.lower[1] = -kInf;
    m.objective[0] = -2.0000000000000004;  // not representable in short decimal
    m.objective_constant = 0.1;
    MilpInstance back = instance_from_json(instance_to_json(m));
    CHECK(instances_equal(m, back));
    CHECK(back.label == "small");
}

TEST_CASE("file save/load round trip") {
    auto path = (std::filesystem::temp_directory_path() / "camlab_milp_rt.json").string();
    MilpInstance m = small_instance();
    save_instance(m, path);
    CHECK(instances_equal(m, load_instance(path)));
    std::filesystem::remove(path);
}

TEST_CASE("instance schema is tagged and checked") {
    auto j = instance_to_json(small_instance());
    CHECK(j.at("schema") == kInstanceSchema);
    j["schema"] = "bogus";
    CHECK_THROWS(instance_from_json(j));
}

TEST_CASE("lp_relaxation drops integrality only") {
    MilpInstance r = lp_relaxation(small_instance());
    CHECK_FALSE(r.integer_mask[0]);
    CHECK(r.rhs == small_instance().rhs);
}
