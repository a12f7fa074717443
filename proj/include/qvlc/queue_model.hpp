#pragma once

// Queue-length Markov chain of the slotted buffer.
//
// Each slot the transmitter looks at the backlog q, draws a batch size s from
// the policy row f[q][.], sends s packets, and then A packets arrive with
// probability alpha:  q' = min((q - s)^+ + a, Q).
//
// Batch sizes are restricted to 0 <= q - s <= Q - A so that the buffer never
// underflows or overflows.

#include "qvlc/fbl_power.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace qvlc {

struct SystemConfig {
    int arrival_batch = 1;     // A
    double arrival_prob = 0.5; // alpha
    int buffer_size = 1;       // Q
    int max_batch = 1;         // S
    PowerTable power_table;

    void validate() const;

    int states() const noexcept { return buffer_size + 1; }
    int actions() const noexcept { return max_batch + 1; }
    double arrival_rate() const noexcept { return arrival_batch * arrival_prob; }
};

struct ActionBounds {
    int min = 0;
    int max = 0;

    bool contains(int s) const noexcept { return s >= min && s <= max; }
    bool single() const noexcept { return min == max; }
};

ActionBounds action_bounds(int q, const SystemConfig& config);

/// One step of the queue recursion, min((q - s)^+ + a, Q).
int queue_step(int q, int s, int a, int buffer_size);

/// f[q][s] = Pr{s[n] = s | q[n] = q}, shape (Q+1) x (S+1).
struct Policy {
    Eigen::MatrixXd probs;

    /// Always serve s_min(q).
    static Policy minimal(const SystemConfig& config);
    /// Always serve s_max(q).
    static Policy maximal(const SystemConfig& config);
};

/// (f_max, f_min) per queue length: the weight on s_max(q) and s_min(q).
struct DegeneratePolicy {
    std::vector<double> f_max;
    std::vector<double> f_min;

    Policy expand(const SystemConfig& config) const;
};

/// Reads off the s_min/s_max weights of a policy; mass on interior actions is
/// reported as a violation by `validate_degenerate`.
DegeneratePolicy to_degenerate(const Policy& policy, const SystemConfig& config);

struct PolicyViolation {
    int q = 0;
    int s = -1;  // -1 when the violation concerns the whole row
    std::string reason;
};

/// Every invariant breach of `policy`. Throws DimensionError on shape mismatch.
std::vector<PolicyViolation> validate_policy(const Policy& policy, const SystemConfig& config);

/// Throws InvalidPolicyError summarising the first violations, if any.
void require_valid(const Policy& policy, const SystemConfig& config);

/// entries(j, i) = Pr{q[n+1] = j | q[n] = i}; columns sum to one.
struct TransitionMatrix {
    Eigen::MatrixXd entries;

    int states() const noexcept { return static_cast<int>(entries.rows()); }
    double prob(int from, int to) const { return entries(to, from); }
};

TransitionMatrix transition_matrix(const Policy& policy, const SystemConfig& config);

struct StateClassification {
    std::vector<std::vector<int>> recurrent_classes;  // each sorted, ordered by smallest state
    std::vector<int> transient;

    bool unichain() const noexcept { return recurrent_classes.size() == 1; }
};

StateClassification classify_states(const TransitionMatrix& tm);

/// Unique solution of Lambda*pi = pi, sum(pi) = 1. Throws NotUnichainError if
/// the chain has more than one recurrent class.
std::vector<double> stationary_distribution(const TransitionMatrix& tm);

/// Stationary distribution of the chain restricted to one closed class; zero
/// outside it.
std::vector<double> stationary_on_class(const TransitionMatrix& tm, const std::vector<int>& states);

/// Little's law delay in slots: sum(q * pi_q) / (A * alpha).
double average_delay(const std::vector<double>& pi, const SystemConfig& config);

/// sum_q sum_s P(s) f[q][s] pi_q, in watts.
double average_power(const Policy& policy, const std::vector<double>& pi, const SystemConfig& config);

/// Long-run packets served per slot, sum_q pi_q sum_s s f[q][s].
double average_service(const Policy& policy, const std::vector<double>& pi);

}  // namespace qvlc
