#include <doctest.h>

#include <filesystem>

#include "mba/plan.hpp"

using namespace mba;

TEST_CASE("plan text roundtrip keeps every line") {
    const auto plan = published_plan("E4");
    CHECK(plan.size() == 10);
    const auto again = parse_plan(format_plan(plan));
    CHECK(again == plan);

    const auto path = (std::filesystem::temp_directory_path() / "mba_plan_roundtrip.txt").string();
    write_plan_file(plan, path);
    CHECK(read_plan_file(path) == plan);
    std::filesystem::remove(path);
}

TEST_CASE("parser accepts comments and blank lines") {
    const auto plan = parse_plan("# head\n\nI 1 1 2 3   # seed\np 1 0 2 0\n");
    REQUIRE(plan.size() == 2);
    CHECK(plan[0].source == PlanSource::Input);
    CHECK(plan[1].source == PlanSource::Pile);
    CHECK(plan[1].mask == FieldMask{0, 2, 0});
    CHECK(plan.n_fields() == 3);
}

TEST_CASE("parser rejects malformed rows") {
    CHECK_THROWS_AS(parse_plan("X 1 1\n"), PlanError);
    CHECK_THROWS_AS(parse_plan("I\n"), PlanError);
    CHECK_THROWS_AS(parse_plan("I 1\n"), PlanError);
    CHECK_THROWS_AS(parse_plan("I 1 1 x\n"), PlanError);
    CHECK_THROWS_AS(parse_plan(""), PlanError);
    CHECK_THROWS_AS(read_plan_file("/nonexistent/plan.txt"), ConfigError);
}

TEST_CASE("validate checks pile reachability, mask length and range") {
    CHECK_NOTHROW(parse_plan("I 1 1\nP 1 1\nP 2 1\n"));
    try {
        parse_plan("I 1 1\nP 3 1\n");
        FAIL("expected a plan error");
    } catch (const PlanError& e) {
        CHECK(e.line() == 1);
    }
    CHECK_THROWS_AS(parse_plan("I 1 1 2\nP 1 1\n"), PlanError);
    CHECK_THROWS_AS(parse_plan("I 1 1 4 3\n"), PlanError);
    CHECK_THROWS_AS(parse_plan("I 0 1\n"), PlanError);
}

TEST_CASE("plan queries") {
    const auto b2 = published_plan("B2");
    CHECK(b2.max_input_index() == 3);
    CHECK(b2.uses_input(3));
    CHECK_FALSE(b2.uses_input(2));
    CHECK(b2.starts_with_unmasked_first_input());
    CHECK_FALSE(parse_plan("I 1 0 2 0\n").starts_with_unmasked_first_input());

    const auto longer = b2.appended(PlanLine{PlanSource::Pile, 4, FieldMask{1}});
    CHECK(longer.size() == b2.size() + 1);
    CHECK(b2.size() == 4);
}

TEST_CASE("classical Arnoldi plan chains the newest pile column") {
    const auto plan = classical_arnoldi_plan(5, 2);
    REQUIRE(plan.size() == 5);
    CHECK(plan[0] == PlanLine{PlanSource::Input, 1, FieldMask{1, 2}});
    for (std::size_t i = 1; i < plan.size(); ++i) {
        CHECK(plan[i].source == PlanSource::Pile);
        CHECK(plan[i].index == static_cast<int>(i));
        CHECK(plan[i].mask.is_identity());
    }
    CHECK_THROWS_AS(classical_arnoldi_plan(0, 1), PlanError);
}

TEST_CASE("published plan lengths") {
    CHECK(published_plan("B1").size() == 2);
    CHECK(published_plan("B2").size() == 4);
    CHECK(published_plan("B3").size() == 7);
    CHECK(published_plan("E1").size() == 4);
    CHECK(published_plan("E2").size() == 4);
    CHECK(published_plan("E3").size() == 6);
    CHECK(published_plan("E4").size() == 10);
    CHECK(published_plan("O1") == published_plan("E4"));
    CHECK_THROWS_AS(published_plan("Z9"), ConfigError);
}

TEST_CASE("mask application is linear and exact") {
    const FieldMask mask{3, 0, 1};
    Vector a(6), b(6);
    a << 1, 2, 3, 4, 5, 6;
    b << -0.5, 0.25, 7, 1e5, -3, 0.125;
    const double alpha = 0.3, beta = -1.7;
    const Vector lhs = apply_mask(alpha * a + beta * b, mask);
    const Vector rhs = alpha * apply_mask(a, mask) + beta * apply_mask(b, mask);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-15 * 1e5);
    Vector expect(6);
    expect << 5, 6, 0, 0, 1, 2;
    CHECK(apply_mask(a, mask) == expect);
    CHECK_THROWS_AS(apply_mask(Vector::Ones(5), mask), ContractError);
    CHECK_THROWS_AS(apply_mask(a, FieldMask{4, 0, 0}), ContractError);
}

TEST_CASE("state vector field access") {
    const auto s = StateVector::from_fields({Vector::Constant(4, 1.0), Vector::Constant(4, 2.0)});
    CHECK(s.n_fields() == 2);
    CHECK(s.n_grid() == 4);
    CHECK(s.field(1).sum() == doctest::Approx(8.0));
    const auto swapped = apply_mask(s, FieldMask{2, 1});
    CHECK(swapped.field(0).sum() == doctest::Approx(8.0));
    CHECK_THROWS_AS(StateVector(3, Vector::Zero(4)), ContractError);
    CHECK_THROWS_AS(StateVector::from_fields({Vector::Zero(3), Vector::Zero(4)}), ContractError);
}
