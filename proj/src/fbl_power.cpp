#include "qvlc/fbl_power.hpp"

#include "qvlc/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qvlc {

namespace {

constexpr double kLn2 = std::numbers::ln2;

void require(bool ok, const char* field, const char* rule) {
    if (!ok) {
        throw ConfigError(std::string("coding.") + field + ": " + rule);
    }
}

}  // namespace

void CodingParams::validate() const {
    require(std::isfinite(slot_duration) && slot_duration > 0.0, "T_seconds", "must be > 0");
    require(std::isfinite(bandwidth) && bandwidth > 0.0, "B_hertz", "must be > 0");
    require(std::isfinite(packet_bits) && packet_bits > 0.0, "L_bits", "must be > 0");
    require(error_prob > 0.0 && error_prob < 0.5, "epsilon", "must lie in (0, 0.5)");
    require(std::isfinite(noise_density) && noise_density > 0.0, "N0_watts_per_hertz", "must be > 0");
    require(max_batch >= 0, "S", "must be >= 0");
}

double gaussian_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double inverse_q(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("inverse_q: probability must lie in (0, 1)");
    }
    // Q(x) drops below the smallest positive double near x = 38.5.
    double lo = -40.0;
    double hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double q = gaussian_tail(mid);
        if (q == p) return mid;
        if (q > p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever end of the final bracket reproduces p more closely.
    return std::abs(gaussian_tail(lo) - p) <= std::abs(gaussian_tail(hi) - p) ? lo : hi;
}

double achievable_packets(int s, double gamma, const CodingParams& params) {
    if (s < 1) throw DomainError("achievable_packets: s must be >= 1");
    if (!(gamma > 0.0)) throw DomainError("achievable_packets: gamma must be > 0");
    const double n = params.uses_per_block() * s;
    const double dispersion = gamma * (2.0 + gamma) / ((1.0 + gamma) * (1.0 + gamma));
    const double rate = std::log1p(gamma) - std::sqrt(dispersion / n) * inverse_q(params.error_prob);
    return n / (params.packet_bits * kLn2) * rate;
}

double snr_floor(const CodingParams& params) {
    return std::expm1(params.packet_bits / params.uses_per_block() * kLn2);
}

namespace {

double batch_for_snr_with(double gamma, const CodingParams& params, double qinv) {
    const double bt = params.uses_per_block();
    const double margin = std::log1p(gamma) - params.packet_bits / bt * kLn2;
    if (!(margin > 0.0)) {
        throw DomainError("batch_for_snr: gamma must exceed 2^(L/BT) - 1");
    }
    const double dispersion = gamma * (gamma + 2.0) / ((1.0 + gamma) * (1.0 + gamma));
    return dispersion / (margin * margin) * qinv * qinv / bt;
}

}  // namespace

double batch_for_snr(double gamma, const CodingParams& params) {
    return batch_for_snr_with(gamma, params, inverse_q(params.error_prob));
}

double solve_gamma_for_batch(int s, const CodingParams& params) {
    if (s < 1) throw DomainError("solve_gamma_for_batch: s must be >= 1");
    const double target = static_cast<double>(s);

    // batch_for_snr is strictly decreasing on the valid branch: +inf at the
    // floor, 0 at infinity.
    const double qinv = inverse_q(params.error_prob);
    const double floor = snr_floor(params);
    double lo = floor * (1.0 + 1e-12);
    if (lo <= floor) lo = std::nextafter(floor, INFINITY);
    double hi = 10.0;
    while (hi <= lo || batch_for_snr_with(hi, params, qinv) >= target) {
        hi *= 2.0;
        if (!std::isfinite(hi)) throw DomainError("solve_gamma_for_batch: no upper bracket");
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        mid = 0.5 * (lo + hi);
        const double value = batch_for_snr_with(mid, params, qinv);
        if (std::abs(value - target) <= 1e-12 * target || mid == lo || mid == hi) break;
        if (value > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return mid;
}

double power_for_batch(int s, const CodingParams& params) {
    if (s < 0) throw DomainError("power_for_batch: s must be >= 0");
    if (s == 0) return 0.0;
    return params.noise_density * params.bandwidth * s * solve_gamma_for_batch(s, params);
}

PowerTable PowerTable::from_powers(std::vector<double> powers) {
    if (powers.empty()) throw ConfigError("power_table.powers: must not be empty");
    if (powers[0] != 0.0) throw ConfigError("power_table.powers[0]: must be exactly 0");
    for (std::size_t s = 1; s < powers.size(); ++s) {
        if (!std::isfinite(powers[s]) || !(powers[s] > powers[s - 1])) {
            std::ostringstream msg;
            msg << "power_table.powers[" << s << "]: powers must be strictly increasing";
            throw ConfigError(msg.str());
        }
    }
    PowerTable table;
    table.powers = std::move(powers);
    table.source = PowerSource::Explicit;
    if (const int s = first_per_packet_increase(table.powers); s != 0) {
        table.warnings.push_back("per-packet power does not decrease at s=" + std::to_string(s));
    }
    if (!is_discretely_concave(table.powers)) {
        table.warnings.push_back("power table is not discretely concave");
    }
    return table;
}

PowerTable build_power_table(const CodingParams& params) {
    params.validate();
    PowerTable table;
    table.source = PowerSource::Analytic;
    table.powers.assign(static_cast<std::size_t>(params.max_batch) + 1, 0.0);
    table.gammas.assign(table.powers.size(), 0.0);
    for (int s = 1; s <= params.max_batch; ++s) {
        const double gamma = solve_gamma_for_batch(s, params);
        table.gammas[s] = gamma;
        table.powers[s] = params.noise_density * params.bandwidth * s * gamma;
    }
    if (const int s = first_per_packet_increase(table.powers); s != 0) {
        throw ConfigError("analytic power table: per-packet power does not decrease at s=" +
                          std::to_string(s));
    }
    if (!is_discretely_concave(table.powers)) {
        table.warnings.push_back("power table is not discretely concave");
    }
    return table;
}

bool is_discretely_concave(const std::vector<double>& powers) {
    for (std::size_t s = 1; s + 1 < powers.size(); ++s) {
        if (powers[s + 1] - powers[s] > powers[s] - powers[s - 1]) return false;
    }
    return true;
}

int first_per_packet_increase(const std::vector<double>& powers) {
    for (std::size_t s = 2; s < powers.size(); ++s) {
        if (powers[s] / static_cast<double>(s) >= powers[s - 1] / static_cast<double>(s - 1)) {
            return static_cast<int>(s);
        }
    }
    return 0;
}

}  // namespace qvlc
