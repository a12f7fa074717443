#include "qvlc/tradeoff.hpp"

#include "qvlc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace qvlc {

namespace {

constexpr double kProbTol = 1e-9;
constexpr double kSlopeTol = 1e-7;
constexpr double kOccupationFloor = 1e-13;

LpInstance start_instance(const SystemConfig& config, LpForm form) {
    config.validate();
    LpInstance inst;
    inst.form = form;
    inst.states = config.states();
    inst.actions = config.actions();
    return inst;
}

// Objective and power row, plus the normalisation, shared by both forms.
void finish_instance(LpInstance& inst, const SystemConfig& config, double p_th, Eigen::MatrixXd balance,
                     std::vector<std::string> labels) {
    const int n = static_cast<int>(inst.variables.size());
    inst.program.cost.resize(n);
    Eigen::RowVectorXd power(n);
    for (int k = 0; k < n; ++k) {
        const LpVariable& v = inst.variables[k];
        inst.program.cost(k) = v.q / config.arrival_rate();
        power(k) = config.power_table[v.s];
    }
    const int rows = static_cast<int>(balance.rows());
    inst.program.eq.resize(rows + 1, n);
    inst.program.eq.topRows(rows) = balance;
    inst.program.eq.row(rows).setOnes();
    inst.program.eq_rhs = Eigen::VectorXd::Zero(rows + 1);
    inst.program.eq_rhs(rows) = 1.0;
    labels.push_back("normalisation");
    inst.eq_labels = std::move(labels);

    if (std::isfinite(p_th)) {
        if (p_th < 0.0) throw DomainError("power budget must be >= 0");
        inst.program.le = power;
        inst.program.le_rhs = Eigen::VectorXd::Constant(1, p_th);
        inst.has_power_row = true;
    } else {
        inst.program.le.resize(0, n);
        inst.program.le_rhs.resize(0);
    }
}

}  // namespace

LpInstance build_full_lp(const SystemConfig& config, double p_th) {
    LpInstance inst = start_instance(config, LpForm::Full);
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        for (int s = b.min; s <= b.max; ++s) inst.variables.push_back({q, s, s == b.max});
    }
    const int n = static_cast<int>(inst.variables.size());
    const double alpha = config.arrival_prob;
    const int arrivals = config.arrival_batch;

    // Row q: inflow into q minus occupation of q.
    Eigen::MatrixXd balance = Eigen::MatrixXd::Zero(config.states(), n);
    std::vector<std::string> labels;
    for (int k = 0; k < n; ++k) {
        const LpVariable& v = inst.variables[k];
        balance(v.q - v.s + arrivals, k) += alpha;
        balance(v.q - v.s, k) += 1.0 - alpha;
        balance(v.q, k) -= 1.0;
    }
    for (int q = 0; q <= config.buffer_size; ++q) labels.push_back("balance q=" + std::to_string(q));
    finish_instance(inst, config, p_th, std::move(balance), std::move(labels));
    return inst;
}

LpInstance build_degenerate_lp(const SystemConfig& config, double p_th) {
    LpInstance inst = start_instance(config, LpForm::Degenerate);
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        inst.variables.push_back({q, b.max, true});
        if (!b.single()) inst.variables.push_back({q, b.min, false});
    }
    const int n = static_cast<int>(inst.variables.size());
    const double alpha = config.arrival_prob;
    const int arrivals = config.arrival_batch;
    const int big_q = config.buffer_size;

    // Row q: flow up across the cut between q and q+1 minus flow down.
    Eigen::MatrixXd balance = Eigen::MatrixXd::Zero(big_q, n);
    std::vector<std::string> labels;
    for (int cut = 0; cut < big_q; ++cut) {
        for (int k = 0; k < n; ++k) {
            const LpVariable& v = inst.variables[k];
            const int after_service = v.q - v.s;
            double coef = 0.0;
            if (v.q <= cut) {
                if (after_service + arrivals > cut) coef += alpha;
                if (after_service > cut) coef += 1.0 - alpha;
            } else {
                if (after_service + arrivals <= cut) coef -= alpha;
                if (after_service <= cut) coef -= 1.0 - alpha;
            }
            balance(cut, k) = coef;
        }
        const int family = cut <= arrivals - 1 ? 1 : (cut <= big_q - arrivals - 1 ? 2 : 3);
        labels.push_back("cut q=" + std::to_string(cut) + " (case " + std::to_string(family) + ")");
    }
    finish_instance(inst, config, p_th, std::move(balance), std::move(labels));
    return inst;
}

std::vector<double> OccupationMeasure::state_probs() const {
    std::vector<double> pi(static_cast<std::size_t>(x.rows()), 0.0);
    for (int q = 0; q < x.rows(); ++q) pi[q] = x.row(q).sum();
    return pi;
}

LpResult solve_instance(const LpInstance& instance) {
    const LpSolution sol = solve_lp(instance.program);
    LpResult out;
    out.status = sol.status;
    out.occupation.x = Eigen::MatrixXd::Zero(instance.states, instance.actions);
    if (sol.status == LpStatus::Unbounded) {
        throw Error("LP reported unbounded; the occupation polytope is bounded");
    }
    if (sol.status != LpStatus::Optimal) return out;
    for (std::size_t k = 0; k < instance.variables.size(); ++k) {
        const LpVariable& v = instance.variables[k];
        // Basic variables sitting at a degenerate zero come back as round-off.
        const double x = sol.x(static_cast<Eigen::Index>(k));
        if (x > kOccupationFloor) out.occupation.x(v.q, v.s) += x;
    }
    out.objective = sol.objective;
    return out;
}

double occupation_power(const OccupationMeasure& m, const SystemConfig& config) {
    double p = 0.0;
    for (int q = 0; q < m.x.rows(); ++q) {
        for (int s = 0; s < m.x.cols(); ++s) p += config.power_table[s] * m.x(q, s);
    }
    return p;
}

double occupation_delay(const OccupationMeasure& m, const SystemConfig& config) {
    double d = 0.0;
    for (int q = 0; q < m.x.rows(); ++q) d += q * m.x.row(q).sum();
    return d / config.arrival_rate();
}

Policy recover_policy(const OccupationMeasure& m, const SystemConfig& config) {
    Policy p{Eigen::MatrixXd::Zero(config.states(), config.actions())};
    const std::vector<double> pi = m.state_probs();
    for (int q = 0; q <= config.buffer_size; ++q) {
        if (pi[q] > 0.0) {
            p.probs.row(q) = m.x.row(q) / pi[q];
        } else {
            p.probs(q, action_bounds(q, config).max) = 1.0;
        }
    }
    return p;
}

DegeneratePolicy recover_degenerate_policy(const std::vector<double>& x_max, const std::vector<double>& x_min,
                                           const SystemConfig& config) {
    if (static_cast<int>(x_max.size()) != config.states() || static_cast<int>(x_min.size()) != config.states()) {
        throw DimensionError("recover_degenerate_policy: expected Q+1 pairs");
    }
    DegeneratePolicy d;
    d.f_max.assign(config.states(), 1.0);
    d.f_min.assign(config.states(), 0.0);
    for (int q = 0; q <= config.buffer_size; ++q) {
        const double pi = x_max[q] + x_min[q];
        if (pi > 0.0 && !action_bounds(q, config).single()) {
            d.f_max[q] = x_max[q] / pi;
            d.f_min[q] = x_min[q] / pi;
        }
    }
    return d;
}

void split_degenerate(const OccupationMeasure& m, const SystemConfig& config, std::vector<double>& x_max,
                      std::vector<double>& x_min) {
    x_max.assign(config.states(), 0.0);
    x_min.assign(config.states(), 0.0);
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        x_max[q] = m.x(q, b.max);
        if (!b.single()) x_min[q] = m.x(q, b.min);
    }
}

ThresholdDescriptor extract_threshold(const DegeneratePolicy& policy, const SystemConfig& config,
                                      const std::optional<std::vector<int>>& states) {
    if (static_cast<int>(policy.f_max.size()) != config.states() ||
        static_cast<int>(policy.f_min.size()) != config.states()) {
        throw DimensionError("extract_threshold: expected Q+1 pairs");
    }
    std::vector<int> inspect;
    if (states) {
        inspect = *states;
        std::sort(inspect.begin(), inspect.end());
    } else {
        for (int q = 0; q <= config.buffer_size; ++q) inspect.push_back(q);
    }

    enum Side { Min = 0, Mixed = 1, Max = 2 };
    std::vector<int> bad;
    int highest = Min;
    int mixed_state = -1;
    int last_min = -1;
    bool any_max = false;
    for (int q : inspect) {
        if (action_bounds(q, config).single()) continue;
        const double fmax = policy.f_max[q];
        const double fmin = policy.f_min[q];
        if (std::abs(fmax + fmin - 1.0) > kProbTol) {
            bad.push_back(q);
            continue;
        }
        const int side = fmin >= 1.0 - kProbTol ? Min : (fmax >= 1.0 - kProbTol ? Max : Mixed);
        if (side < highest || (side == Mixed && mixed_state >= 0)) {
            bad.push_back(q);
            continue;
        }
        highest = side;
        if (side == Mixed) mixed_state = q;
        if (side == Min) last_min = q;
        if (side == Max) any_max = true;
    }
    if (!bad.empty()) throw NotThresholdFormError(std::move(bad));

    if (mixed_state >= 0) return {mixed_state, policy.f_min[mixed_state]};
    if (any_max) return {last_min + 1, 0.0};
    if (last_min >= 0) return {last_min, 1.0};
    return {0, 0.0};
}

double min_feasible_power(const SystemConfig& config) {
    LpInstance inst = build_full_lp(config, kNoPowerLimit);
    Eigen::VectorXd power(inst.variables.size());
    for (std::size_t k = 0; k < inst.variables.size(); ++k) power(k) = config.power_table[inst.variables[k].s];
    inst.program.cost = power;
    const LpSolution sol = solve_lp(inst.program);
    if (sol.status != LpStatus::Optimal) throw Error("min_feasible_power: no stabilising policy");
    return sol.objective;
}

DelayFloor min_delay(const SystemConfig& config) {
    LpInstance inst = build_full_lp(config, kNoPowerLimit);
    const LpSolution best = solve_lp(inst.program);
    if (best.status != LpStatus::Optimal) throw Error("min_delay: LP not solvable");

    // Least power among delay-optimal measures.
    const int n = inst.program.variables();
    Eigen::VectorXd power(n);
    for (int k = 0; k < n; ++k) power(k) = config.power_table[inst.variables[k].s];
    LinearProgram lex = inst.program;
    lex.le = inst.program.cost.transpose();
    lex.le_rhs = Eigen::VectorXd::Constant(1, best.objective + 1e-12 * std::max(1.0, best.objective));
    lex.cost = power;
    const LpSolution cheapest = solve_lp(lex);
    if (cheapest.status != LpStatus::Optimal) throw Error("min_delay: lexicographic LP failed");
    return {inst.program.cost.dot(cheapest.x), cheapest.objective};
}

std::optional<double> optimal_delay(const SystemConfig& config, double p_th, LpForm form) {
    const LpInstance inst = form == LpForm::Full ? build_full_lp(config, p_th) : build_degenerate_lp(config, p_th);
    const LpSolution sol = solve_lp(inst.program);
    if (sol.status != LpStatus::Optimal) return std::nullopt;
    return sol.objective;
}

TradeoffPoint optimal_point(const SystemConfig& config, double p_th, LpForm form) {
    const LpInstance inst = form == LpForm::Full ? build_full_lp(config, p_th) : build_degenerate_lp(config, p_th);
    const LpResult res = solve_instance(inst);
    if (res.status != LpStatus::Optimal) {
        const double p_min = min_feasible_power(config);
        std::ostringstream msg;
        msg << "power budget " << p_th << " W is below the minimal stabilising power " << p_min << " W";
        throw InfeasibleError(msg.str(), p_min);
    }
    TradeoffPoint pt;
    pt.avg_delay = res.objective;
    pt.avg_power = occupation_power(res.occupation, config);
    pt.policy = recover_policy(res.occupation, config);
    std::vector<double> x_max;
    std::vector<double> x_min;
    split_degenerate(res.occupation, config, x_max, x_min);
    pt.degenerate = recover_degenerate_policy(x_max, x_min, config);
    pt.classes = classify_states(transition_matrix(pt.policy, config));
    if (pt.classes.unichain()) {
        try {
            pt.threshold = extract_threshold(pt.degenerate, config, pt.classes.recurrent_classes.front());
        } catch (const NotThresholdFormError&) {
            pt.threshold.reset();
        }
    }
    return pt;
}

double TradeoffCurve::delay_at(double p) const {
    if (vertices.empty()) throw DomainError("delay_at: empty curve");
    if (p < p_min * (1.0 - 1e-12) - 1e-300) throw DomainError("delay_at: budget below p_min");
    if (p >= vertices.back().avg_power) return vertices.back().avg_delay;
    for (std::size_t k = 1; k < vertices.size(); ++k) {
        const auto& a = vertices[k - 1];
        const auto& b = vertices[k];
        if (p <= b.avg_power) {
            const double t = (p - a.avg_power) / (b.avg_power - a.avg_power);
            return a.avg_delay + t * (b.avg_delay - a.avg_delay);
        }
    }
    return vertices.back().avg_delay;
}

namespace {

bool same_slope(double a, double b) { return std::abs(a - b) <= kSlopeTol * std::max(std::abs(a), std::abs(b)); }

struct Sample {
    double p;
    double d;
};

struct Piece {
    Sample left;
    Sample right;

    double slope() const { return (right.d - left.d) / (right.p - left.p); }
    double width() const { return right.p - left.p; }
    double at(double p) const { return left.d + slope() * (p - left.p); }
};

// Slopes of the short pieces left over from kink isolation are dominated by
// LP round-off, so the longer piece serves as the reference line.
bool collinear(const Piece& a, const Piece& b, double d_tol) {
    if (same_slope(a.slope(), b.slope())) return true;
    const Piece& ref = a.width() >= b.width() ? a : b;
    const Piece& other = a.width() >= b.width() ? b : a;
    return std::abs(ref.at(other.left.p) - other.left.d) <= d_tol &&
           std::abs(ref.at(other.right.p) - other.right.d) <= d_tol;
}

}  // namespace

TradeoffCurve tradeoff_curve(const SystemConfig& config, int grid_points) {
    if (grid_points < 1) throw DomainError("tradeoff_curve: grid_points must be >= 1");
    TradeoffCurve curve;
    curve.p_min = min_feasible_power(config);
    const DelayFloor floor = min_delay(config);
    curve.d_min = floor.delay;
    const double p_sat = std::max(floor.power, curve.p_min);

    auto delay = [&](double p) {
        const auto d = optimal_delay(config, p);
        if (!d) throw Error("tradeoff_curve: LP infeasible inside [p_min, p_sat]");
        return *d;
    };

    const double span = p_sat - curve.p_min;
    if (!(span > 1e-12 * std::max(std::abs(p_sat), 1e-300))) {
        curve.vertices.push_back(optimal_point(config, curve.p_min));
        return curve;
    }

    const Sample first{curve.p_min, delay(curve.p_min)};
    const double d_tol = 1e-11 * std::max(1.0, first.d);
    const double p_tol = 1e-10 * span;

    // Convexity makes an interval linear iff its midpoint lies on the chord.
    std::vector<Piece> pieces;
    std::function<void(Sample, Sample)> isolate = [&](Sample a, Sample b) {
        const double mid = 0.5 * (a.p + b.p);
        const Sample m{mid, delay(mid)};
        if (std::abs(m.d - 0.5 * (a.d + b.d)) <= d_tol) {
            pieces.push_back({a, b});
            return;
        }
        if (b.p - a.p <= p_tol) return;
        isolate(a, m);
        isolate(m, b);
    };
    Sample prev = first;
    for (int k = 1; k <= grid_points; ++k) {
        const double p = k == grid_points ? p_sat : curve.p_min + span * k / grid_points;
        const Sample next{p, k == grid_points ? curve.d_min : delay(p)};
        isolate(prev, next);
        prev = next;
    }

    // Merge neighbouring pieces on a common line; fit each line end to end.
    std::vector<Piece> lines;
    for (const Piece& pc : pieces) {
        if (!lines.empty() && collinear(lines.back(), pc, d_tol)) {
            lines.back().right = pc.right;
        } else {
            lines.push_back(pc);
        }
    }

    // A sliver that straddles a kink passes the chord test but belongs to
    // neither neighbour.
    if (lines.size() > 1) {
        std::vector<Piece> kept;
        for (const Piece& l : lines) {
            if (l.width() > 16.0 * p_tol) kept.push_back(l);
        }
        if (!kept.empty()) lines = std::move(kept);
    }

    std::vector<double> breaks{curve.p_min};
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const Piece& l = lines[k - 1];
        const Piece& r = lines[k];
        const double kl = l.slope();
        const double kr = r.slope();
        double x = (r.left.d - l.left.d + kl * l.left.p - kr * r.left.p) / (kl - kr);
        x = std::clamp(x, l.left.p, r.right.p);
        if (x > breaks.back()) breaks.push_back(x);
    }
    if (p_sat > breaks.back()) breaks.push_back(p_sat);

    for (double p : breaks) curve.vertices.push_back(optimal_point(config, p));
    curve.vertices.back().avg_delay = std::min(curve.vertices.back().avg_delay, curve.d_min);
    return curve;
}

std::vector<PowerDelay> lower_left_envelope(std::vector<PowerDelay> points) {
    if (points.empty()) return {};
    std::sort(points.begin(), points.end(), [](const PowerDelay& a, const PowerDelay& b) {
        return a.power < b.power || (a.power == b.power && a.delay < b.delay);
    });
    auto cross = [](const PowerDelay& o, const PowerDelay& a, const PowerDelay& b) {
        return (a.power - o.power) * (b.delay - o.delay) - (a.delay - o.delay) * (b.power - o.power);
    };
    std::vector<PowerDelay> hull;
    for (const PowerDelay& pt : points) {
        if (!hull.empty() && hull.back().power == pt.power) continue;  // keep the lowest delay per power
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), pt) <= 0.0) hull.pop_back();
        hull.push_back(pt);
    }

    double d_scale = 0.0;
    for (const auto& pt : hull) d_scale = std::max(d_scale, std::abs(pt.delay));
    const double d_tol = 1e-12 * std::max(1.0, d_scale);
    std::vector<PowerDelay> out{hull.front()};
    for (std::size_t k = 1; k < hull.size(); ++k) {
        if (hull[k].delay >= out.back().delay - d_tol) break;
        out.push_back(hull[k]);
    }

    std::vector<PowerDelay> merged{out.front()};
    for (std::size_t k = 1; k < out.size(); ++k) {
        if (merged.size() >= 2) {
            const PowerDelay& a = merged[merged.size() - 2];
            const PowerDelay& b = merged.back();
            const double s1 = (b.delay - a.delay) / (b.power - a.power);
            const double s2 = (out[k].delay - b.delay) / (out[k].power - b.power);
            if (same_slope(s1, s2)) merged.pop_back();
        }
        merged.push_back(out[k]);
    }
    return merged;
}

BruteForceResult brute_force_tradeoff(const SystemConfig& config, std::uint64_t max_policies) {
    config.validate();
    const int n = config.states();
    std::vector<ActionBounds> bounds;
    std::uint64_t total = 1;
    for (int q = 0; q < n; ++q) {
        bounds.push_back(action_bounds(q, config));
        total *= static_cast<std::uint64_t>(bounds.back().max - bounds.back().min + 1);
        if (total > max_policies) {
            throw InstanceTooLargeError("brute force: more than " + std::to_string(max_policies) +
                                        " deterministic policies");
        }
    }

    BruteForceResult out;
    out.policies = total;
    std::vector<int> actions(n);
    for (int q = 0; q < n; ++q) actions[q] = bounds[q].min;
    Policy policy{Eigen::MatrixXd::Zero(n, config.actions())};
    for (std::uint64_t k = 0; k < total; ++k) {
        policy.probs.setZero();
        for (int q = 0; q < n; ++q) policy.probs(q, actions[q]) = 1.0;
        const TransitionMatrix tm = transition_matrix(policy, config);
        const StateClassification cls = classify_states(tm);
        for (const auto& c : cls.recurrent_classes) {
            const std::vector<double> pi = stationary_on_class(tm, c);
            out.points.push_back({average_power(policy, pi, config), average_delay(pi, config), actions, c});
        }
        for (int q = 0; q < n; ++q) {
            if (++actions[q] <= bounds[q].max) break;
            actions[q] = bounds[q].min;
        }
    }

    std::vector<PowerDelay> cloud;
    cloud.reserve(out.points.size());
    for (const auto& pt : out.points) cloud.push_back({pt.power, pt.delay});
    out.envelope = lower_left_envelope(std::move(cloud));
    return out;
}

}  // namespace qvlc
