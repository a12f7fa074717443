#pragma once

// Finite-blocklength power model.
//
// s packets of L bits are jointly encoded over s resource blocks of duration T
// and bandwidth B, i.e. a codeword of T*B*s channel uses. The normal
// approximation links the batch size s to the SNR gamma needed to meet the
// decoding error probability eps:
//
//   s = T*B*s / (L ln2) * ( ln(1+gamma) - sqrt(V(gamma) / (T*B*s)) * Qinv(eps) )
//   V(gamma) = gamma*(2+gamma) / (1+gamma)^2
//
// Solving for s in closed form gives the parametric curve
//
//   s(gamma) = V(gamma) / (ln(1+gamma) - (L/BT) ln2)^2 * Qinv(eps)^2 / BT
//   P(gamma) = N0 * B * s(gamma) * gamma
//
// valid on gamma > 2^(L/BT) - 1, where s(gamma) is strictly decreasing.

#include <string>
#include <vector>

namespace qvlc {

struct CodingParams {
    double slot_duration = 0.0;  // T, seconds
    double bandwidth = 0.0;      // B, hertz
    double packet_bits = 0.0;    // L, bits
    double error_prob = 0.0;     // eps
    double noise_density = 0.0;  // N0, watts per hertz
    int max_batch = 0;           // S

    /// Throws ConfigError naming the first violated field.
    void validate() const;

    /// Channel uses per resource block (B*T).
    double uses_per_block() const noexcept { return bandwidth * slot_duration; }
};

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
double gaussian_tail(double x);

/// Inverse of the Gaussian tail: returns x with Q(x) = p. Throws DomainError
/// unless 0 < p < 1.
double inverse_q(double p);

/// Right-hand side of the normal approximation for batch size s at SNR gamma.
/// Negative when gamma is too small for any packet to get through.
double achievable_packets(int s, double gamma, const CodingParams& params);

/// Smallest admissible SNR, 2^(L/BT) - 1 (exclusive).
double snr_floor(const CodingParams& params);

/// Batch size supported at SNR gamma on the valid branch (first line of the
/// parametric curve). Requires gamma > snr_floor(params).
double batch_for_snr(double gamma, const CodingParams& params);

/// Unique gamma > snr_floor with batch_for_snr(gamma) == s.
double solve_gamma_for_batch(int s, const CodingParams& params);

/// Minimum transmit power for s packets in one slot; exactly 0 for s == 0.
double power_for_batch(int s, const CodingParams& params);

enum class PowerSource { Analytic, Explicit };

/// Transmit power per batch size, P(0..S).
struct PowerTable {
    std::vector<double> powers;   // watts; powers[0] == 0
    std::vector<double> gammas;   // SNR per batch; gammas[0] == 0; empty for Explicit tables
    PowerSource source = PowerSource::Explicit;
    std::vector<std::string> warnings;

    int max_batch() const noexcept { return static_cast<int>(powers.size()) - 1; }
    double operator[](int s) const { return powers.at(static_cast<std::size_t>(s)); }

    /// Wraps user-supplied watt values. Throws ConfigError if powers[0] != 0
    /// or the table is not strictly increasing; a non-decreasing per-packet
    /// power is recorded in `warnings`.
    static PowerTable from_powers(std::vector<double> powers);
};

/// Analytic table for s = 0..S. Throws ConfigError if the per-packet power
/// fails to decrease strictly (naming the offending s).
PowerTable build_power_table(const CodingParams& params);

/// True when P(s+1) - P(s) <= P(s) - P(s-1) for every s = 1..S-1.
bool is_discretely_concave(const std::vector<double>& powers);

/// First s >= 2 with powers[s]/s >= powers[s-1]/(s-1), or 0 if none.
int first_per_packet_increase(const std::vector<double>& powers);

}  // namespace qvlc
