#pragma once

// Delay-optimal coding policies under an average power budget.
//
// With x[q][s] = f[q][s] * pi_q (the long-run frequency of being at backlog q
// and sending s packets) both the average delay and the average power become
// linear, and the stationarity conditions become linear equalities, so the
// constrained policy search is a small LP. Optimal policies only ever use the
// two extreme batch sizes s_min(q) and s_max(q), which gives a smaller
// "degenerate" LP over (x_max[q], x_min[q]) whose stationarity rows are the
// flow balances across each cut {0..q} | {q+1..Q}.

#include "qvlc/queue_model.hpp"
#include "qvlc/simplex.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace qvlc {

inline constexpr double kNoPowerLimit = std::numeric_limits<double>::infinity();

enum class LpForm { Full, Degenerate };

struct LpVariable {
    int q = 0;
    int s = 0;
    bool is_max = true;  // degenerate form: the s_max(q) variable (also used when s_min == s_max)
};

struct LpInstance {
    LpForm form = LpForm::Full;
    LinearProgram program;
    std::vector<LpVariable> variables;
    std::vector<std::string> eq_labels;
    int states = 0;
    int actions = 0;
    bool has_power_row = false;
};

/// min (1/(A alpha)) sum q x[q][s]  s.t. power <= p_th, per-state balance,
/// normalisation, x >= 0, with variables only for feasible (q, s).
/// Pass kNoPowerLimit to drop the power row.
LpInstance build_full_lp(const SystemConfig& config, double p_th);

/// Same problem restricted to s in {s_min(q), s_max(q)}; the balance rows are
/// the cut flows for q = 0..Q-1. States with s_min == s_max get one variable.
LpInstance build_degenerate_lp(const SystemConfig& config, double p_th);

/// x[q][s], shape (Q+1) x (S+1).
struct OccupationMeasure {
    Eigen::MatrixXd x;

    std::vector<double> state_probs() const;
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    OccupationMeasure occupation;
    double objective = 0.0;  // average delay in slots
};

/// Solves the instance and maps the vertex back onto x[q][s].
LpResult solve_instance(const LpInstance& instance);

/// Linear functionals of an occupation measure.
double occupation_power(const OccupationMeasure& m, const SystemConfig& config);
double occupation_delay(const OccupationMeasure& m, const SystemConfig& config);

/// f[q][s] = x[q][s] / pi_q, or the indicator of s_max(q) for unvisited q.
Policy recover_policy(const OccupationMeasure& m, const SystemConfig& config);

/// (f_max, f_min) = (x_max, x_min) / pi_q, or (1, 0) for unvisited q or when
/// s_min(q) == s_max(q).
DegeneratePolicy recover_degenerate_policy(const std::vector<double>& x_max, const std::vector<double>& x_min,
                                           const SystemConfig& config);

/// Splits an occupation measure supported on {s_min, s_max} into the pair form.
void split_degenerate(const OccupationMeasure& m, const SystemConfig& config, std::vector<double>& x_max,
                      std::vector<double>& x_min);

struct ThresholdDescriptor {
    int q_star = 0;
    double mix_min = 0.0;  // weight on s_min at q_star
};

/// Matches the single-threshold form: f_min = 1 below q_star, f_max = 1 above,
/// randomisation only at q_star. States with s_min == s_max fit either side.
/// When `states` is given only those queue lengths are inspected. Throws
/// NotThresholdFormError listing the offending states.
ThresholdDescriptor extract_threshold(const DegeneratePolicy& policy, const SystemConfig& config,
                                      const std::optional<std::vector<int>>& states = std::nullopt);

/// Smallest average power of any stabilising policy.
double min_feasible_power(const SystemConfig& config);

/// Minimal delay without a power budget, and the least power that attains it.
struct DelayFloor {
    double delay = 0.0;
    double power = 0.0;
};
DelayFloor min_delay(const SystemConfig& config);

struct TradeoffPoint {
    double avg_power = 0.0;  // watts
    double avg_delay = 0.0;  // slots
    Policy policy;
    DegeneratePolicy degenerate;
    std::optional<ThresholdDescriptor> threshold;  // empty if the recurrent part is not of threshold form
    StateClassification classes;
};

/// Solves the LP at budget p_th and recovers the optimal policy. Throws
/// InfeasibleError (carrying the minimal power) when p_th is too small.
TradeoffPoint optimal_point(const SystemConfig& config, double p_th, LpForm form = LpForm::Degenerate);

/// Optimal delay at budget p_th, or nullopt when infeasible.
std::optional<double> optimal_delay(const SystemConfig& config, double p_th, LpForm form = LpForm::Degenerate);

struct TradeoffCurve {
    std::vector<TradeoffPoint> vertices;  // increasing power, decreasing delay
    double p_min = 0.0;
    double d_min = 0.0;

    /// Piecewise-linear interpolation; flat at d_min beyond the last vertex.
    /// Throws DomainError below p_min.
    double delay_at(double p) const;
};

/// Traces the convex piecewise-linear frontier: a coarse grid of
/// `grid_points` intervals, midpoint-vs-chord bisection to isolate kinks, and
/// line intersection of the neighbouring linear pieces for each breakpoint.
TradeoffCurve tradeoff_curve(const SystemConfig& config, int grid_points = 32);

struct PowerDelay {
    double power = 0.0;
    double delay = 0.0;
};

struct BrutePoint {
    double power = 0.0;
    double delay = 0.0;
    std::vector<int> actions;          // deterministic batch size per q
    std::vector<int> recurrent_class;  // the class this long-run behaviour lives on
};

struct BruteForceResult {
    std::vector<BrutePoint> points;
    std::vector<PowerDelay> envelope;  // lower-left convex frontier, increasing power
    std::uint64_t policies = 0;
};

/// Enumerates every deterministic feasible policy, one point per recurrent
/// class. Throws InstanceTooLargeError above `max_policies`.
BruteForceResult brute_force_tradeoff(const SystemConfig& config, std::uint64_t max_policies = 10'000'000);

/// Lower-left convex frontier of a point cloud: from the least-power point
/// down to the least-power point among those of minimal delay. Consecutive
/// edges whose slopes agree within 1e-7 relative are merged.
std::vector<PowerDelay> lower_left_envelope(std::vector<PowerDelay> points);

}  // namespace qvlc
