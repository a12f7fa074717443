#pragma once

// JSON run configuration shared by all CLI workflows.
//
//   {
//     "arrival": {"A": 1, "alpha": 0.5},
//     "buffer":  {"Q": 7},
//     "coding":  {"S": 3, "T_seconds": "0.125 ms", "B_hertz": "1440 kHz",
//                 "L_bits": 256, "epsilon": 1e-7, "N0_watts_per_hertz": "-150 dBm_per_Hz"},
//     "power_table": {"powers": [0, 2.59e-7, 4.355e-7, 6.038e-7],    // instead of "coding"
//                     "T_seconds": 0.000125},                          // optional, for ms output
//     "solve": {"p_th": 1.05e-7},
//     "sweep": {"p_min": 1e-7, "p_max": 1.3e-7, "grid_points": 50},
//     "sim":   {"n_slots": 1000000, "warmup": 10000, "seed": 7, "replicas": 16, "initial_q": 0}
//   }
//
// Values are SI. Quantities may also be strings with a unit suffix; each
// conversion is recorded in RunConfig::notes. Unknown keys are rejected.

#include "qvlc/fbl_power.hpp"
#include "qvlc/queue_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qvlc {

struct SweepSettings {
    std::optional<double> p_min;
    std::optional<double> p_max;
    int grid_points = 50;
};

struct SimSettings {
    std::int64_t n_slots = 1'000'000;
    std::optional<std::int64_t> warmup;  // default 1% of n_slots
    std::uint64_t seed = 1;
    int replicas = 16;
    int initial_q = 0;
};

struct RunConfig {
    SystemConfig system;
    std::optional<CodingParams> coding;
    std::optional<double> slot_duration;  // from coding, or power_table.T_seconds
    std::optional<double> p_th;
    std::optional<SweepSettings> sweep;
    std::optional<SimSettings> sim;
    std::optional<std::string> system_issue;  // set when `system` fails validation
    std::vector<std::string> notes;
    nlohmann::json source;

    /// The validated system; throws ConfigError if `system_issue` is set.
    const SystemConfig& checked_system() const;

    double slot_seconds() const;  // NaN when unknown
};

/// Throws ConfigError with the offending field path.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

/// Unit-aware scalar parsing used by the loader; exposed for tests.
enum class Quantity { Time, Frequency, NoiseDensity };
double parse_quantity(const nlohmann::json& value, Quantity kind, const std::string& path,
                      std::vector<std::string>* notes = nullptr);

}  // namespace qvlc
