#include "qvlc/queue_model.hpp"

#include "qvlc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qvlc {

namespace {

constexpr double kRowTolerance = 1e-12;

}  // namespace

void SystemConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (arrival_batch < 1) fail("arrival.A: must be >= 1");
    if (!(arrival_prob > 0.0 && arrival_prob < 1.0)) fail("arrival.alpha: must lie in (0, 1)");
    if (buffer_size < 1) fail("buffer.Q: must be >= 1");
    if (max_batch < 1) fail("coding.S: must be >= 1");
    if (arrival_batch > max_batch) fail("arrival.A: must not exceed S");
    if (arrival_batch > buffer_size) fail("arrival.A: must not exceed Q");
    if (power_table.max_batch() != max_batch) {
        fail("power table has " + std::to_string(power_table.powers.size()) + " entries, expected S+1 = " +
             std::to_string(max_batch + 1));
    }
}

ActionBounds action_bounds(int q, const SystemConfig& config) {
    if (q < 0 || q > config.buffer_size) throw DomainError("action_bounds: q out of range");
    return {std::max(0, q - (config.buffer_size - config.arrival_batch)), std::min(config.max_batch, q)};
}

int queue_step(int q, int s, int a, int buffer_size) {
    return std::min(std::max(q - s, 0) + a, buffer_size);
}

Policy Policy::minimal(const SystemConfig& config) {
    Policy p{Eigen::MatrixXd::Zero(config.states(), config.actions())};
    for (int q = 0; q <= config.buffer_size; ++q) p.probs(q, action_bounds(q, config).min) = 1.0;
    return p;
}

Policy Policy::maximal(const SystemConfig& config) {
    Policy p{Eigen::MatrixXd::Zero(config.states(), config.actions())};
    for (int q = 0; q <= config.buffer_size; ++q) p.probs(q, action_bounds(q, config).max) = 1.0;
    return p;
}

Policy DegeneratePolicy::expand(const SystemConfig& config) const {
    if (static_cast<int>(f_max.size()) != config.states() || static_cast<int>(f_min.size()) != config.states()) {
        throw DimensionError("degenerate policy must have Q+1 pairs");
    }
    Policy p{Eigen::MatrixXd::Zero(config.states(), config.actions())};
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        if (b.single()) {
            p.probs(q, b.max) = 1.0;
        } else {
            p.probs(q, b.max) = f_max[q];
            p.probs(q, b.min) = f_min[q];
        }
    }
    return p;
}

DegeneratePolicy to_degenerate(const Policy& policy, const SystemConfig& config) {
    DegeneratePolicy d;
    d.f_max.resize(config.states());
    d.f_min.resize(config.states());
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        if (b.single()) {
            d.f_max[q] = 1.0;
            d.f_min[q] = 0.0;
        } else {
            d.f_max[q] = policy.probs(q, b.max);
            d.f_min[q] = policy.probs(q, b.min);
        }
    }
    return d;
}

std::vector<PolicyViolation> validate_policy(const Policy& policy, const SystemConfig& config) {
    if (policy.probs.rows() != config.states() || policy.probs.cols() != config.actions()) {
        std::ostringstream msg;
        msg << "policy is " << policy.probs.rows() << "x" << policy.probs.cols() << ", expected "
            << config.states() << "x" << config.actions();
        throw DimensionError(msg.str());
    }
    std::vector<PolicyViolation> out;
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        double sum = 0.0;
        for (int s = 0; s <= config.max_batch; ++s) {
            const double f = policy.probs(q, s);
            sum += f;
            if (!(f >= 0.0 && f <= 1.0)) {
                out.push_back({q, s, "probability outside [0, 1]"});
            } else if (f != 0.0 && !b.contains(s)) {
                out.push_back({q, s, "mass outside feasible batch sizes [" + std::to_string(b.min) + ", " +
                                         std::to_string(b.max) + "]"});
            }
        }
        if (!(std::abs(sum - 1.0) <= kRowTolerance)) {
            std::ostringstream msg;
            msg << "row sums to " << sum;
            out.push_back({q, -1, msg.str()});
        }
    }
    return out;
}

void require_valid(const Policy& policy, const SystemConfig& config) {
    const auto violations = validate_policy(policy, config);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid policy:";
    for (std::size_t k = 0; k < violations.size() && k < 5; ++k) {
        const auto& v = violations[k];
        msg << " (q=" << v.q;
        if (v.s >= 0) msg << ", s=" << v.s;
        msg << ": " << v.reason << ")";
    }
    if (violations.size() > 5) msg << " and " << violations.size() - 5 << " more";
    throw InvalidPolicyError(msg.str());
}

TransitionMatrix transition_matrix(const Policy& policy, const SystemConfig& config) {
    require_valid(policy, config);
    const double alpha = config.arrival_prob;
    const int arrivals = config.arrival_batch;
    TransitionMatrix tm{Eigen::MatrixXd::Zero(config.states(), config.states())};
    for (int i = 0; i <= config.buffer_size; ++i) {
        const ActionBounds b = action_bounds(i, config);
        for (int s = b.min; s <= b.max; ++s) {
            const double f = policy.probs(i, s);
            if (f == 0.0) continue;
            tm.entries(i - s + arrivals, i) += alpha * f;
            tm.entries(i - s, i) += (1.0 - alpha) * f;
        }
    }
    return tm;
}

StateClassification classify_states(const TransitionMatrix& tm) {
    const int n = tm.states();
    // reach(i, j): j reachable from i in zero or more steps.
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (int start = 0; start < n; ++start) {
        std::vector<int> stack{start};
        reach[start][start] = 1;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j = 0; j < n; ++j) {
                if (tm.entries(j, i) > 0.0 && !reach[start][j]) {
                    reach[start][j] = 1;
                    stack.push_back(j);
                }
            }
        }
    }

    StateClassification out;
    std::vector<char> assigned(n, 0);
    for (int i = 0; i < n; ++i) {
        if (assigned[i]) continue;
        std::vector<int> cls;
        for (int j = i; j < n; ++j) {
            if (reach[i][j] && reach[j][i]) cls.push_back(j);
        }
        bool closed = true;
        for (int a : cls) {
            assigned[a] = 1;
            for (int j = 0; j < n && closed; ++j) {
                if (reach[a][j] && !reach[j][a]) closed = false;
            }
        }
        if (closed) {
            out.recurrent_classes.push_back(std::move(cls));
        } else {
            out.transient.insert(out.transient.end(), cls.begin(), cls.end());
        }
    }
    std::sort(out.transient.begin(), out.transient.end());
    return out;
}

std::vector<double> stationary_on_class(const TransitionMatrix& tm, const std::vector<int>& states) {
    const int m = static_cast<int>(states.size());
    if (m == 0) throw DomainError("stationary_on_class: empty class");
    Eigen::MatrixXd system(m, m);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
            system(r, c) = tm.entries(states[r], states[c]) - (r == c ? 1.0 : 0.0);
        }
    }
    // One balance equation is redundant; replace it with the normalisation.
    system.row(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(m - 1) = 1.0;
    const Eigen::VectorXd sol = system.fullPivLu().solve(rhs);

    std::vector<double> pi(static_cast<std::size_t>(tm.states()), 0.0);
    for (int r = 0; r < m; ++r) pi[states[r]] = std::max(sol(r), 0.0);
    return pi;
}

std::vector<double> stationary_distribution(const TransitionMatrix& tm) {
    StateClassification cls = classify_states(tm);
    if (!cls.unichain()) {
        throw NotUnichainError(std::move(cls.recurrent_classes), std::move(cls.transient));
    }
    return stationary_on_class(tm, cls.recurrent_classes.front());
}

double average_delay(const std::vector<double>& pi, const SystemConfig& config) {
    double mean_queue = 0.0;
    for (std::size_t q = 0; q < pi.size(); ++q) mean_queue += static_cast<double>(q) * pi[q];
    return mean_queue / config.arrival_rate();
}

double average_power(const Policy& policy, const std::vector<double>& pi, const SystemConfig& config) {
    double power = 0.0;
    for (int q = 0; q < policy.probs.rows(); ++q) {
        for (int s = 0; s < policy.probs.cols(); ++s) {
            power += config.power_table[s] * policy.probs(q, s) * pi[q];
        }
    }
    return power;
}

double average_service(const Policy& policy, const std::vector<double>& pi) {
    double rate = 0.0;
    for (int q = 0; q < policy.probs.rows(); ++q) {
        for (int s = 0; s < policy.probs.cols(); ++s) rate += s * policy.probs(q, s) * pi[q];
    }
    return rate;
}

}  // namespace qvlc
