#include "qvlc/simulator.hpp"

#include "qvlc/errors.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <vector>

namespace qvlc {

namespace {

constexpr int kBatches = 32;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// mt19937_64's output sequence is fixed by the standard; the conversion to
// [0, 1) is done by hand so results do not depend on the library's
// distribution implementations.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(splitmix64(seed)) {}
    double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

struct Arrival {
    std::int64_t slot;
    int count;
    bool counted;  // false for the initial backlog
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe batch_means(const std::vector<double>& sums, const std::vector<double>& weights) {
    double total = 0.0;
    double weight = 0.0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        total += sums[b];
        weight += weights[b];
    }
    MeanSe out;
    if (weight <= 0.0) return out;
    out.mean = total / weight;
    int used = 0;
    double ss = 0.0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        if (weights[b] <= 0.0) continue;
        const double m = sums[b] / weights[b];
        ss += (m - out.mean) * (m - out.mean);
        ++used;
    }
    if (used > 1) out.se = std::sqrt(ss / (used - 1) / used);
    return out;
}

MeanSe across(const std::vector<double>& xs) {
    MeanSe out;
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return out;
}

}  // namespace

SimulationSpec SimulationSpec::with_default_warmup(std::int64_t n_slots, std::uint64_t seed, int initial_q) {
    return {n_slots, n_slots / 100, seed, initial_q};
}

std::uint64_t replica_seed(std::uint64_t seed, int index) {
    if (index == 0) return seed;
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)));
}

SimulationResult simulate(const Policy& policy, const SystemConfig& config, const SimulationSpec& spec) {
    config.validate();
    require_valid(policy, config);
    if (spec.n_slots < 1 || spec.warmup_slots < 0 || spec.warmup_slots >= spec.n_slots) {
        throw DomainError("simulation needs 0 <= warmup_slots < n_slots");
    }
    if (spec.initial_q < 0 || spec.initial_q > config.buffer_size) {
        throw DomainError("simulation initial_q must lie in [0, Q]");
    }

    // Per-state cumulative distribution over feasible batch sizes.
    std::vector<std::vector<std::pair<double, int>>> cdf(config.states());
    for (int q = 0; q <= config.buffer_size; ++q) {
        const ActionBounds b = action_bounds(q, config);
        double acc = 0.0;
        for (int s = b.min; s <= b.max; ++s) {
            if (policy.probs(q, s) <= 0.0) continue;
            acc += policy.probs(q, s);
            cdf[q].emplace_back(acc, s);
        }
    }

    Uniform uniform(spec.seed);
    const int arrivals = config.arrival_batch;
    const double alpha = config.arrival_prob;
    const std::int64_t window = spec.n_slots - spec.warmup_slots;

    std::vector<double> queue_sum(kBatches, 0.0);
    std::vector<double> power_sum(kBatches, 0.0);
    std::vector<double> slots(kBatches, 0.0);
    std::vector<double> sojourn_sum(kBatches, 0.0);
    std::vector<double> sojourn_n(kBatches, 0.0);

    std::deque<Arrival> fifo;
    if (spec.initial_q > 0) fifo.push_back({0, spec.initial_q, false});

    SimulationResult out;
    out.initial_queue = static_cast<std::uint64_t>(spec.initial_q);
    int q = spec.initial_q;
    for (std::int64_t n = 0; n < spec.n_slots; ++n) {
        const auto& row = cdf[q];
        int s = row.back().second;
        const double u = uniform() * row.back().first;
        for (const auto& [edge, batch] : row) {
            if (u < edge) {
                s = batch;
                break;
            }
        }
        if (s > q || q - s > config.buffer_size - arrivals) {
            throw Error("simulate: drew an infeasible batch size");
        }

        const bool measured = n >= spec.warmup_slots;
        const int bucket = measured ? static_cast<int>((n - spec.warmup_slots) * kBatches / window) : 0;
        if (measured) {
            queue_sum[bucket] += q;
            power_sum[bucket] += config.power_table[s];
            slots[bucket] += 1.0;
        }

        for (int left = s; left > 0;) {
            Arrival& head = fifo.front();
            const int take = std::min(left, head.count);
            if (head.counted && head.slot >= spec.warmup_slots) {
                const int b = static_cast<int>((head.slot - spec.warmup_slots) * kBatches / window);
                sojourn_sum[std::min(b, kBatches - 1)] += static_cast<double>(take) * static_cast<double>(n + 1 - head.slot);
                sojourn_n[std::min(b, kBatches - 1)] += take;
            }
            head.count -= take;
            left -= take;
            if (head.count == 0) fifo.pop_front();
        }
        out.packets_served += static_cast<std::uint64_t>(s);
        q -= s;

        if (uniform() < alpha) {
            q = queue_step(q, 0, arrivals, config.buffer_size);
            fifo.push_back({n + 1, arrivals, true});
            out.packets_arrived += static_cast<std::uint64_t>(arrivals);
        }
    }
    out.final_queue = static_cast<std::uint64_t>(q);

    const MeanSe queue = batch_means(queue_sum, slots);
    const MeanSe power = batch_means(power_sum, slots);
    const MeanSe sojourn = batch_means(sojourn_sum, sojourn_n);
    out.mean_queue = queue.mean;
    out.little_delay = queue.mean / config.arrival_rate();
    out.stderr_delay = queue.se / config.arrival_rate();
    out.mean_power = power.mean;
    out.stderr_power = power.se;
    out.sojourn_delay = sojourn.mean;
    out.stderr_sojourn = sojourn.se;
    return out;
}

SimulationResult batch_simulate(const Policy& policy, const SystemConfig& config, const SimulationSpec& spec,
                                int n_replicas) {
    if (n_replicas < 1) throw DomainError("batch_simulate: n_replicas must be >= 1");
    if (n_replicas == 1) return simulate(policy, config, spec);

    std::vector<SimulationResult> runs;
    runs.reserve(static_cast<std::size_t>(n_replicas));
    for (int r = 0; r < n_replicas; ++r) {
        SimulationSpec rs = spec;
        rs.seed = replica_seed(spec.seed, r);
        runs.push_back(simulate(policy, config, rs));
    }

    std::vector<double> queue;
    std::vector<double> power;
    std::vector<double> sojourn;
    SimulationResult out;
    out.replicas = n_replicas;
    for (const auto& r : runs) {
        queue.push_back(r.mean_queue);
        power.push_back(r.mean_power);
        sojourn.push_back(r.sojourn_delay);
        out.packets_arrived += r.packets_arrived;
        out.packets_served += r.packets_served;
        out.initial_queue += r.initial_queue;
        out.final_queue += r.final_queue;
    }
    const MeanSe mq = across(queue);
    const MeanSe mp = across(power);
    const MeanSe ms = across(sojourn);
    out.mean_queue = mq.mean;
    out.little_delay = mq.mean / config.arrival_rate();
    out.stderr_delay = mq.se / config.arrival_rate();
    out.mean_power = mp.mean;
    out.stderr_power = mp.se;
    out.sojourn_delay = ms.mean;
    out.stderr_sojourn = ms.se;
    return out;
}

}  // namespace qvlc
