#include "qvlc/errors.hpp"
#include "qvlc/tradeoff.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

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

// A=1, Q=2, S=2, alpha=1/2, P=(0,1,1.5): the four deterministic policies give
// (P, D) = (0.375, 2), (0.5, 1) and two dominated points.
SystemConfig small_instance() { return make_config(1, 0.5, 2, {0, 1, 1.5}); }

SystemConfig reference_instance(double alpha = 0.5) { return make_config(1, alpha, 7, {0, 2.59e-7, 4.355e-7, 6.038e-7}); }

Eigen::VectorXd occupation_vector(const LpInstance& inst, const Policy& p, const std::vector<double>& pi) {
    Eigen::VectorXd x(inst.variables.size());
    for (std::size_t k = 0; k < inst.variables.size(); ++k) {
        const LpVariable& v = inst.variables[k];
        x(k) = p.probs(v.q, v.s) * pi[v.q];
    }
    return x;
}

// Balance across the cut {0..q} | {q+1..Q} written out case by case, with
// the upper summation limits clamped to Q. Holds when Q >= 2A; the q = Q cut
// is trivial and omitted.
double literal_cut_residual(const SystemConfig& c, int q, const std::vector<double>& xmax,
                            const std::vector<double>& xmin) {
    const int A = c.arrival_batch;
    const int Q = c.buffer_size;
    const int S = c.max_batch;
    const double a = c.arrival_prob;
    auto pi = [&](int i) { return xmax[i] + xmin[i]; };
    double lhs = 0.0;
    double rhs = 0.0;
    if (q <= A - 1) {
        for (int i = 0; i <= q; ++i) lhs += a * pi(i);
        for (int i = q + 1; i <= std::min(Q, q + S); ++i) rhs += (1 - a) * xmax[i];
    } else if (q <= Q - A - 1) {
        for (int i = q - A + 1; i <= q; ++i) lhs += a * xmin[i];
        for (int i = q + 1; i <= std::min(Q, q + S); ++i) rhs += (1 - a) * xmax[i];
        for (int i = q + 1; i <= std::min(Q, q + S - A); ++i) rhs += a * xmax[i];
    } else {
        for (int i = q - A + 1; i <= q; ++i) lhs += a * xmin[i];
        for (int i = q + 1; i <= Q; ++i) rhs += (1 - a) * pi(i);
        for (int i = q + 1; i <= std::min(Q, q + S - A); ++i) rhs += a * xmax[i];
    }
    return lhs - rhs;
}

DegeneratePolicy random_degenerate(const SystemConfig& c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    DegeneratePolicy d;
    for (int q = 0; q <= c.buffer_size; ++q) {
        const double f = u(rng);
        d.f_max.push_back(f);
        d.f_min.push_back(1.0 - f);
    }
    return d;
}

}  // namespace

TEST_SUITE("lp_tradeoff") {

TEST_CASE("full LP shape for A=1, Q=2, S=1") {
    const SystemConfig c = make_config(1, 0.5, 2, {0, 1});
    const LpInstance inst = build_full_lp(c, 1.0);
    REQUIRE(inst.variables.size() == 4);
    const std::pair<int, int> expected[] = {{0, 0}, {1, 0}, {1, 1}, {2, 1}};
    for (int k = 0; k < 4; ++k) {
        CHECK(inst.variables[k].q == expected[k].first);
        CHECK(inst.variables[k].s == expected[k].second);
    }
    CHECK(inst.program.eq.rows() + inst.program.le.rows() == 5);
    CHECK(inst.has_power_row);
    CHECK_FALSE(build_full_lp(c, kNoPowerLimit).has_power_row);
    CHECK_THROWS_AS(build_full_lp(c, -1.0), DomainError);
}

TEST_CASE("full LP variables are exactly the feasible pairs") {
    const SystemConfig c = make_config(2, 0.4, 7, {0, 1, 1.7, 2.3});
    const LpInstance inst = build_full_lp(c, kNoPowerLimit);
    std::size_t k = 0;
    for (int q = 0; q <= c.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, c);
        for (int s = b.min; s <= b.max; ++s, ++k) {
            REQUIRE(k < inst.variables.size());
            CHECK(inst.variables[k].q == q);
            CHECK(inst.variables[k].s == s);
        }
    }
    CHECK(k == inst.variables.size());
}

TEST_CASE("A=1, Q=1, S=1: feasible iff p_th >= alpha P(1)") {
    const SystemConfig c = make_config(1, 0.3, 1, {0, 2});
    CHECK(min_feasible_power(c) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK_FALSE(optimal_delay(c, 0.59).has_value());
    CHECK(optimal_delay(c, 0.6).value() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(optimal_delay(c, 0.6, LpForm::Full).value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate LP for the reference configuration merges only q = 0") {
    const SystemConfig c = reference_instance();
    const LpInstance inst = build_degenerate_lp(c, kNoPowerLimit);
    CHECK(inst.variables.size() == 15);
    CHECK(inst.variables[0].q == 0);
    CHECK(inst.variables[1].q == 1);
    CHECK(inst.program.eq.rows() == 8);  // seven cuts plus normalisation
    CHECK(inst.eq_labels.size() == 8);
}

TEST_CASE("degenerate LP balance rows agree with the case-by-case cut formulas") {
    std::mt19937_64 rng(7);
    const SystemConfig configs[] = {reference_instance(), make_config(2, 0.4, 7, {0, 1, 1.7, 2.3}),
                                    make_config(2, 0.6, 4, {0, 1, 1.8}), make_config(1, 0.25, 5, {0, 1, 1.6, 2.0})};
    for (const SystemConfig& c : configs) {
        REQUIRE(c.buffer_size >= 2 * c.arrival_batch);
        const LpInstance inst = build_degenerate_lp(c, kNoPowerLimit);
        for (int trial = 0; trial < 5; ++trial) {
            const DegeneratePolicy d = random_degenerate(c, rng);
            const Policy p = d.expand(c);
            const auto pi = stationary_distribution(transition_matrix(p, c));
            std::vector<double> xmax(c.states()), xmin(c.states());
            for (int q = 0; q <= c.buffer_size; ++q) {
                const ActionBounds b = action_bounds(q, c);
                xmax[q] = p.probs(q, b.max) * pi[q];
                xmin[q] = b.single() ? 0.0 : p.probs(q, b.min) * pi[q];
            }
            for (int q = 0; q < c.buffer_size; ++q) CHECK(std::abs(literal_cut_residual(c, q, xmax, xmin)) < 1e-14);
            const Eigen::VectorXd x = occupation_vector(inst, p, pi);
            CHECK((inst.program.eq * x - inst.program.eq_rhs).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
}

TEST_CASE("small instance: optimal delays at the reference budgets") {
    const SystemConfig c = small_instance();
    for (LpForm form : {LpForm::Full, LpForm::Degenerate}) {
        CHECK(optimal_delay(c, 0.5, form).value() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(optimal_delay(c, 0.375, form).value() == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(optimal_delay(c, 0.4375, form).value() == doctest::Approx(1.5).epsilon(1e-12));
        CHECK_FALSE(optimal_delay(c, 0.37, form).has_value());
    }
    CHECK(min_feasible_power(c) == doctest::Approx(0.375).epsilon(1e-12));
    const DelayFloor floor = min_delay(c);
    CHECK(floor.delay == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(floor.power == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("infeasible budgets carry the minimal power") {
    try {
        optimal_point(small_instance(), 0.37);
        FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
        CHECK(e.min_power() == doctest::Approx(0.375).epsilon(1e-12));
    }
}

TEST_CASE("optimal point: LP value equals the recovered policy's chain value") {
    const SystemConfig c = reference_instance();
    const double p_min = min_feasible_power(c);
    const double p_top = c.power_table[3];
    for (int k = 0; k <= 10; ++k) {
        const double p_th = p_min + (p_top - p_min) * k / 10.0;
        for (LpForm form : {LpForm::Full, LpForm::Degenerate}) {
            const TradeoffPoint pt = optimal_point(c, p_th, form);
            REQUIRE(pt.classes.unichain());
            const auto pi = stationary_distribution(transition_matrix(pt.policy, c));
            CHECK(average_delay(pi, c) == doctest::Approx(pt.avg_delay).epsilon(1e-8));
            CHECK(average_power(pt.policy, pi, c) == doctest::Approx(pt.avg_power).epsilon(1e-8));
            CHECK(pt.avg_power <= p_th * (1 + 1e-9));
            CHECK(pt.threshold.has_value());
        }
    }
}

TEST_CASE("recover_policy falls back to s_max on unvisited states") {
    const SystemConfig c = small_instance();
    OccupationMeasure m{Eigen::MatrixXd::Zero(3, 3)};
    m.x(1, 1) = 0.5;
    m.x(0, 0) = 0.5;
    const Policy p = recover_policy(m, c);
    CHECK(p.probs(0, 0) == 1.0);
    CHECK(p.probs(1, 1) == 1.0);
    CHECK(p.probs(2, 2) == 1.0);
    CHECK(m.state_probs()[2] == 0.0);

    const DegeneratePolicy d = recover_degenerate_policy({0.0, 0.25, 0.0}, {0.0, 0.25, 0.0}, c);
    CHECK(d.f_max[1] == 0.5);
    CHECK(d.f_min[1] == 0.5);
    CHECK(d.f_max[2] == 1.0);
    CHECK(d.f_min[2] == 0.0);
}

TEST_CASE("extract_threshold") {
    const SystemConfig c = reference_instance();
    SUBCASE("threshold at 2 with an even mix") {
        DegeneratePolicy d{{1, 0, 0.5, 1, 1, 1, 1, 1}, {0, 1, 0.5, 0, 0, 0, 0, 0}};
        const ThresholdDescriptor t = extract_threshold(d, c);
        CHECK(t.q_star == 2);
        CHECK(t.mix_min == 0.5);
    }
    SUBCASE("greedy policy") {
        DegeneratePolicy d{std::vector<double>(8, 1.0), std::vector<double>(8, 0.0)};
        const ThresholdDescriptor t = extract_threshold(d, c);
        CHECK(t.q_star == 0);
        CHECK(t.mix_min == 0.0);
    }
    SUBCASE("deterministic switch") {
        DegeneratePolicy d{{1, 0, 0, 0, 1, 1, 1, 1}, {0, 1, 1, 1, 0, 0, 0, 0}};
        const ThresholdDescriptor t = extract_threshold(d, c);
        CHECK(t.q_star == 4);
        CHECK(t.mix_min == 0.0);
    }
    SUBCASE("non-monotone policy") {
        DegeneratePolicy d{{1, 0, 1, 0, 1, 1, 1, 1}, {0, 1, 0, 1, 0, 0, 0, 0}};
        try {
            extract_threshold(d, c);
            FAIL("expected NotThresholdFormError");
        } catch (const NotThresholdFormError& e) {
            CHECK(e.violating_states() == std::vector<int>{3});
        }
    }
    SUBCASE("two randomised states") {
        DegeneratePolicy d{{1, 0.5, 0.5, 1, 1, 1, 1, 1}, {0, 0.5, 0.5, 0, 0, 0, 0, 0}};
        CHECK_THROWS_AS(extract_threshold(d, c), NotThresholdFormError);
    }
    SUBCASE("restricted to a subset of states") {
        DegeneratePolicy d{{1, 1, 0, 0, 1, 1, 1, 1}, {0, 0, 1, 1, 0, 0, 0, 0}};
        CHECK_THROWS_AS(extract_threshold(d, c), NotThresholdFormError);
        const ThresholdDescriptor t = extract_threshold(d, c, std::vector<int>{2, 3, 4, 5, 6, 7});
        CHECK(t.q_star == 4);
    }
}

TEST_CASE("small instance curve") {
    const TradeoffCurve curve = tradeoff_curve(small_instance());
    CHECK(curve.p_min == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(curve.d_min == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(curve.vertices.size() == 2);
    CHECK(curve.vertices[0].avg_power == doctest::Approx(0.375).epsilon(1e-10));
    CHECK(curve.vertices[0].avg_delay == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(curve.vertices[1].avg_power == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(curve.vertices[1].avg_delay == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(curve.delay_at(0.4375) == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(curve.delay_at(10.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(curve.delay_at(0.3), DomainError);
}

TEST_CASE("curve geometry on the reference configuration") {
    const TradeoffCurve curve = tradeoff_curve(reference_instance());
    REQUIRE(curve.vertices.size() >= 2);
    CHECK(curve.vertices.front().avg_power == doctest::Approx(curve.p_min).epsilon(1e-9));
    CHECK(curve.vertices.back().avg_delay == doctest::Approx(curve.d_min).epsilon(1e-9));
    double prev_slope = -INFINITY;
    for (std::size_t k = 1; k < curve.vertices.size(); ++k) {
        const auto& a = curve.vertices[k - 1];
        const auto& b = curve.vertices[k];
        CHECK(b.avg_power > a.avg_power);
        CHECK(b.avg_delay < a.avg_delay);
        const double slope = (b.avg_delay - a.avg_delay) / (b.avg_power - a.avg_power);
        CHECK(slope < 0.0);
        CHECK(slope >= prev_slope);
        prev_slope = slope;
    }
}

TEST_CASE("minimal power never decreases with the arrival probability") {
    double prev = 0.0;
    for (double alpha = 0.1; alpha < 0.95; alpha += 0.1) {
        const double p = min_feasible_power(reference_instance(alpha));
        CHECK(p >= prev);
        prev = p;
    }
    const SystemConfig single = make_config(1, 0.05, 3, {0, 1});
    CHECK(min_feasible_power(single) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("brute force") {
    SUBCASE("forced actions give one point") {
        const SystemConfig c = make_config(1, 0.3, 1, {0, 2});
        const BruteForceResult r = brute_force_tradeoff(c);
        CHECK(r.policies == 1);
        REQUIRE(r.points.size() == 1);
        CHECK(r.points[0].power == doctest::Approx(0.6).epsilon(1e-14));
        CHECK(r.points[0].delay == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("small instance") {
        const BruteForceResult r = brute_force_tradeoff(small_instance());
        CHECK(r.policies == 4);
        REQUIRE(r.envelope.size() == 2);
        CHECK(r.envelope[0].power == doctest::Approx(0.375).epsilon(1e-14));
        CHECK(r.envelope[0].delay == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(r.envelope[1].power == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(r.envelope[1].delay == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("multichain policies contribute every class") {
        const SystemConfig c = make_config(1, 0.5, 3, {0, 1, 1.5});
        const BruteForceResult r = brute_force_tradeoff(c);
        const auto it = std::find_if(r.points.begin(), r.points.end(), [](const BrutePoint& p) {
            return p.actions == std::vector<int>{0, 1, 0, 1} && p.recurrent_class == std::vector<int>{2, 3};
        });
        REQUIRE(it != r.points.end());
        // Class {2, 3}: pi = (1/2, 1/2), always one packet out of state 3.
        CHECK(it->delay == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(it->power == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("guard") {
        CHECK_THROWS_AS(brute_force_tradeoff(reference_instance(), 10), InstanceTooLargeError);
    }
}

TEST_CASE("lower-left envelope") {
    const auto env = lower_left_envelope({{1, 5}, {2, 3.5}, {3, 2}, {4, 1}, {5, 1}, {2.5, 4}, {3, 1.5}});
    // (2,3.5) lies above the chord from (1,5) to (3,1.5); (4,1) is the cheapest minimal-delay point.
    REQUIRE(env.size() == 3);
    CHECK(env[0].power == 1);
    CHECK(env[1].power == 3);
    CHECK(env[1].delay == 1.5);
    CHECK(env[2].power == 4);
    const auto collinear = lower_left_envelope({{0, 2}, {1, 1}, {2, 0}});
    CHECK(collinear.size() == 2);
}

TEST_CASE("an interior batch size can beat both extremes") {
    const SystemConfig c =
        make_config(2, 0.43965584292077126, 5, {0, 1.0487695403064716, 2.0441799034560035, 2.8847497724858133});
    const double p = 0.864641;
    const double full = optimal_delay(c, p, LpForm::Full).value();
    const double degenerate = optimal_delay(c, p, LpForm::Degenerate).value();
    CHECK(full == doctest::Approx(1.57029913).epsilon(1e-8));
    CHECK(degenerate - full > 0.15);

    // The envelope vertex responsible serves one packet at q = 2, where the range is [0, 2].
    const BruteForceResult r = brute_force_tradeoff(c);
    const auto it = std::find_if(r.envelope.begin(), r.envelope.end(),
                                 [](const PowerDelay& v) { return std::abs(v.delay - 1.56862658) < 1e-8; });
    REQUIRE(it != r.envelope.end());
    const auto pt = std::find_if(r.points.begin(), r.points.end(), [&](const BrutePoint& b) {
        return b.power == it->power && b.delay == it->delay;
    });
    REQUIRE(pt != r.points.end());
    CHECK(pt->actions[2] == 1);
}

TEST_CASE("an optimal degenerate policy need not be of threshold form") {
    const SystemConfig c =
        make_config(1, 0.50114593231941784, 3, {0, 1.0047092363741277, 1.9418520892322901, 2.2409539627235069});
    const double p = 0.377248;
    const TradeoffPoint opt = optimal_point(c, p, LpForm::Degenerate);
    CHECK(opt.avg_delay == doctest::Approx(optimal_delay(c, p, LpForm::Full).value()).epsilon(1e-12));
    REQUIRE(opt.classes.unichain());
    CHECK_THROWS_AS(extract_threshold(opt.degenerate, c, opt.classes.recurrent_classes.front()), NotThresholdFormError);

    // Power falls and delay rises as the weight on s_min(q*) grows, so the best
    // threshold policy for each q* spends the budget exactly.
    auto threshold = [&](int q_star, double mix) {
        Policy pol{Eigen::MatrixXd::Zero(c.states(), c.actions())};
        for (int q = 0; q <= c.buffer_size; ++q) {
            const ActionBounds b = action_bounds(q, c);
            const double w = q < q_star ? 1.0 : q > q_star ? 0.0 : mix;
            pol.probs(q, b.min) += w;
            pol.probs(q, b.max) += 1.0 - w;
        }
        const auto pi = stationary_distribution(transition_matrix(pol, c));
        return std::pair{average_power(pol, pi, c), average_delay(pi, c)};
    };
    double best = INFINITY;
    for (int q_star = 0; q_star <= c.buffer_size; ++q_star) {
        if (threshold(q_star, 0.0).first <= p) {
            if (threshold(q_star, 1.0).first <= p) {
                best = std::min(best, threshold(q_star, 1.0).second);
                continue;
            }
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (threshold(q_star, mid).first <= p ? lo : hi) = mid;
            }
            best = std::min(best, threshold(q_star, lo).second);
        }
    }
    CHECK(best - opt.avg_delay > 0.015);
}

}  // TEST_SUITE
