#include "qvlc/errors.hpp"
#include "qvlc/queue_model.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace qvlc;

namespace {

SystemConfig make_config(int A, double alpha, int Q, std::vector<double> powers) {
    SystemConfig c;
    c.arrival_batch = A;
    c.arrival_prob = alpha;
    c.buffer_size = Q;
    c.max_batch = static_cast<int>(powers.size()) - 1;
    c.power_table = PowerTable::from_powers(std::move(powers));
    c.validate();
    return c;
}

Policy deterministic(const SystemConfig& c, const std::vector<int>& action) {
    Policy p{Eigen::MatrixXd::Zero(c.states(), c.actions())};
    for (int q = 0; q < c.states(); ++q) p.probs(q, action[q]) = 1.0;
    return p;
}

// Reference stationary vector by brute simulation of the distribution:
// iterate pi <- P pi from uniform with a lazy step so periodic chains settle.
std::vector<double> power_iteration(const SystemConfig& c, const Policy& pol, int steps = 20000) {
    const int n = c.states();
    std::vector<double> pi(n, 1.0 / n);
    for (int it = 0; it < steps; ++it) {
        std::vector<double> next(n, 0.0);
        for (int q = 0; q < n; ++q) {
            for (int s = 0; s < c.actions(); ++s) {
                const double f = pol.probs(q, s);
                if (f == 0.0) continue;
                const int base = std::max(q - s, 0);
                next[std::min(base + c.arrival_batch, c.buffer_size)] += pi[q] * f * c.arrival_prob;
                next[base] += pi[q] * f * (1.0 - c.arrival_prob);
            }
        }
        for (int q = 0; q < n; ++q) pi[q] = 0.5 * pi[q] + 0.5 * next[q];
    }
    return pi;
}

}  // namespace

TEST_SUITE("queue_model") {

TEST_CASE("system validation") {
    SystemConfig c = make_config(1, 0.5, 3, {0, 1, 1.5});
    CHECK_NOTHROW(c.validate());
    SystemConfig bad = c;
    bad.arrival_prob = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.arrival_batch = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.max_batch = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.buffer_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("action bounds for A=2, S=3, Q=7") {
    const SystemConfig c = make_config(2, 0.4, 7, {0, 1, 1.7, 2.3});
    const int lo[] = {0, 0, 0, 0, 0, 0, 1, 2};
    const int hi[] = {0, 1, 2, 3, 3, 3, 3, 3};
    for (int q = 0; q <= 7; ++q) {
        const ActionBounds b = action_bounds(q, c);
        CHECK(b.min == lo[q]);
        CHECK(b.max == hi[q]);
    }
    CHECK(action_bounds(0, c).single());
    CHECK_THROWS_AS(action_bounds(8, c), DomainError);
}

TEST_CASE("every feasible action keeps the buffer in range") {
    const SystemConfig c = make_config(2, 0.3, 5, {0, 1, 1.9, 2.7});
    for (int q = 0; q <= c.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, c);
        for (int s = b.min; s <= b.max; ++s) {
            CHECK(q - s >= 0);
            CHECK(q - s + c.arrival_batch <= c.buffer_size);
            CHECK(queue_step(q, s, c.arrival_batch, c.buffer_size) == q - s + c.arrival_batch);
        }
    }
    CHECK(queue_step(1, 3, 0, 5) == 0);
    CHECK(queue_step(4, 0, 2, 5) == 5);
}

TEST_CASE("A=1, Q=1, S=1: forced policy has pi = (1-alpha, alpha)") {
    const double alpha = 0.3;
    const SystemConfig c = make_config(1, alpha, 1, {0, 1});
    const Policy p = Policy::maximal(c);
    const TransitionMatrix tm = transition_matrix(p, c);
    CHECK(tm.prob(0, 0) == doctest::Approx(1 - alpha));
    CHECK(tm.prob(0, 1) == doctest::Approx(alpha));
    CHECK(tm.prob(1, 0) == doctest::Approx(1 - alpha));
    const auto pi = stationary_distribution(tm);
    CHECK(pi[0] == doctest::Approx(1 - alpha).epsilon(1e-14));
    CHECK(pi[1] == doctest::Approx(alpha).epsilon(1e-14));
    CHECK(average_delay(pi, c) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(average_power(p, pi, c) == doctest::Approx(alpha).epsilon(1e-14));
}

TEST_CASE("A=1, S=1, Q=2: serving the minimum leaves state 0 transient") {
    const SystemConfig c = make_config(1, 0.5, 2, {0, 1});
    const Policy lazy = Policy::minimal(c);
    const TransitionMatrix tm = transition_matrix(lazy, c);
    const StateClassification cls = classify_states(tm);
    REQUIRE(cls.unichain());
    CHECK(cls.recurrent_classes[0] == std::vector<int>{1, 2});
    CHECK(cls.transient == std::vector<int>{0});
    const auto pi = stationary_distribution(tm);
    CHECK(pi[0] == 0.0);
    CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(pi[2] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(average_delay(pi, c) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("transition matrix columns sum to one") {
    const SystemConfig c = make_config(2, 0.35, 6, {0, 1, 1.8, 2.4});
    Policy p{Eigen::MatrixXd::Zero(c.states(), c.actions())};
    for (int q = 0; q <= c.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, c);
        const int width = b.max - b.min + 1;
        for (int s = b.min; s <= b.max; ++s) p.probs(q, s) = 1.0 / width;
    }
    const TransitionMatrix tm = transition_matrix(p, c);
    for (int i = 0; i < tm.states(); ++i) CHECK(tm.entries.col(i).sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((tm.entries.array() >= 0.0).all());
}

TEST_CASE("stationary distribution matches power iteration and conserves flow") {
    const SystemConfig c = make_config(2, 0.35, 6, {0, 1, 1.8, 2.4});
    Policy p{Eigen::MatrixXd::Zero(c.states(), c.actions())};
    for (int q = 0; q <= c.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, c);
        p.probs(q, b.max) += 0.6;
        p.probs(q, b.min) += 0.4;
    }
    const TransitionMatrix tm = transition_matrix(p, c);
    const auto pi = stationary_distribution(tm);
    const auto ref = power_iteration(c, p);
    for (int q = 0; q <= c.buffer_size; ++q) CHECK(pi[q] == doctest::Approx(ref[q]).epsilon(1e-10));
    CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    // No packets are dropped, so the service rate equals the arrival rate.
    CHECK(average_service(p, pi) == doctest::Approx(c.arrival_rate()).epsilon(1e-12));
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(pi.data(), pi.size());
    CHECK((tm.entries * v - v).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two closed classes raise NotUnichainError") {
    const SystemConfig c = make_config(1, 0.5, 3, {0, 1, 1.5});
    const Policy p = deterministic(c, {0, 1, 0, 1});
    const TransitionMatrix tm = transition_matrix(p, c);
    const StateClassification cls = classify_states(tm);
    CHECK_FALSE(cls.unichain());
    REQUIRE(cls.recurrent_classes.size() == 2);
    CHECK(cls.recurrent_classes[0] == std::vector<int>{0, 1});
    CHECK(cls.recurrent_classes[1] == std::vector<int>{2, 3});
    CHECK(cls.transient.empty());
    try {
        stationary_distribution(tm);
        FAIL("expected NotUnichainError");
    } catch (const NotUnichainError& e) {
        CHECK(e.recurrent_classes().size() == 2);
    }
    const auto upper = stationary_on_class(tm, cls.recurrent_classes[1]);
    CHECK(upper[0] == 0.0);
    CHECK(upper[2] == doctest::Approx(0.5));
    CHECK(upper[3] == doctest::Approx(0.5));
}

TEST_CASE("policy validation") {
    const SystemConfig c = make_config(1, 0.5, 2, {0, 1, 1.5});
    Policy p = Policy::maximal(c);
    CHECK(validate_policy(p, c).empty());

    p.probs(0, 1) = 0.5;
    p.probs(0, 0) = 0.5;
    auto v = validate_policy(p, c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].q == 0);
    CHECK(v[0].s == 1);
    CHECK_THROWS_AS(transition_matrix(p, c), InvalidPolicyError);

    p = Policy::maximal(c);
    p.probs(2, 2) = 0.9;
    v = validate_policy(p, c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].s == -1);

    p = Policy::maximal(c);
    p.probs(1, 1) = 1.5;
    p.probs(1, 0) = -0.5;
    CHECK(validate_policy(p, c).size() == 2);

    Policy wrong{Eigen::MatrixXd::Zero(2, 3)};
    CHECK_THROWS_AS(validate_policy(wrong, c), DimensionError);
}

TEST_CASE("degenerate policies round-trip through the full form") {
    const SystemConfig c = make_config(2, 0.4, 7, {0, 1, 1.7, 2.3});
    DegeneratePolicy d;
    d.f_max = {1, 0.25, 1, 0, 0.5, 1, 0.75, 0.1};
    d.f_min.resize(8);
    for (int q = 0; q < 8; ++q) d.f_min[q] = 1.0 - d.f_max[q];
    const Policy p = d.expand(c);
    CHECK(validate_policy(p, c).empty());
    const DegeneratePolicy back = to_degenerate(p, c);
    for (int q = 1; q < 8; ++q) {
        CHECK(back.f_max[q] == d.f_max[q]);
        CHECK(back.f_min[q] == d.f_min[q]);
    }
    // q = 0 admits only s = 0, reported as f_max = 1.
    CHECK(back.f_max[0] == 1.0);
    CHECK(p.probs(0, 0) == 1.0);
}

}  // TEST_SUITE
