#pragma once

#include "qvlc/queue_model.hpp"

#include <cstdint>

namespace qvlc {

struct SimulationSpec {
    std::int64_t n_slots = 1'000'000;
    std::int64_t warmup_slots = 10'000;
    std::uint64_t seed = 1;
    int initial_q = 0;

    /// warmup_slots defaults to 1% of n_slots.
    static SimulationSpec with_default_warmup(std::int64_t n_slots, std::uint64_t seed, int initial_q = 0);
};

struct SimulationResult {
    double mean_queue = 0.0;     // packets, time average after warmup
    double little_delay = 0.0;   // slots, mean_queue / (A alpha)
    double sojourn_delay = 0.0;  // slots, FIFO departure_slot - arrival_slot
    double mean_power = 0.0;     // watts
    double stderr_delay = 0.0;
    double stderr_sojourn = 0.0;
    double stderr_power = 0.0;
    std::uint64_t packets_arrived = 0;  // whole run, warmup included
    std::uint64_t packets_served = 0;
    std::uint64_t initial_queue = 0;    // summed over replicas
    std::uint64_t final_queue = 0;      // summed over replicas
    int replicas = 1;
};

/// Seed of replica `index`; replica 0 reuses `seed` itself.
std::uint64_t replica_seed(std::uint64_t seed, int index);

/// Runs the slotted queue: draw s ~ f[q][.], serve, then a batch of A
/// arrives with probability alpha. Single-run standard errors come from 32
/// batch means over the post-warmup window.
SimulationResult simulate(const Policy& policy, const SystemConfig& config, const SimulationSpec& spec);

/// Independent replicas; means are averaged and standard errors are taken
/// across replicas. With one replica the result equals `simulate`.
SimulationResult batch_simulate(const Policy& policy, const SystemConfig& config, const SimulationSpec& spec,
                                int n_replicas);

}  // namespace qvlc
