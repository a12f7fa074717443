#include "qvlc/cli.hpp"

#include "qvlc/errors.hpp"
#include "qvlc/run_config.hpp"
#include "qvlc/simulator.hpp"
#include "qvlc/tradeoff.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace qvlc::cli {

using nlohmann::json;

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json classes_json(const StateClassification& cls) {
    return json{{"recurrent_classes", cls.recurrent_classes}, {"transient", cls.transient}};
}

std::string join_states(const std::vector<int>& xs) {
    std::string out = "{";
    for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + std::to_string(xs[k]);
    return out + "}";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw ConfigError(path + ": cannot write");
    f << text;
}

void echo_notes(const RunConfig& cfg, std::ostream& out) {
    for (const auto& n : cfg.notes) out << "note: " << n << "\n";
    for (const auto& w : cfg.system.power_table.warnings) out << "warning: " << w << "\n";
}

void print_policy(const Policy& policy, const SystemConfig& config, std::ostream& out) {
    out << "policy f[q][s]:\n    q";
    for (int s = 0; s <= config.max_batch; ++s) out << std::setw(20) << ("s=" + std::to_string(s));
    out << "\n";
    for (int q = 0; q <= config.buffer_size; ++q) {
        out << std::setw(5) << q;
        for (int s = 0; s <= config.max_batch; ++s) out << std::setw(20) << format_number(policy.probs(q, s));
        out << "\n";
    }
}

struct ChainReport {
    StateClassification classes;
    std::vector<double> pi;  // empty when multichain
    double delay = NAN;
    double power = NAN;
};

ChainReport evaluate_chain(const Policy& policy, const SystemConfig& config) {
    ChainReport r;
    const TransitionMatrix tm = transition_matrix(policy, config);
    r.classes = classify_states(tm);
    if (r.classes.unichain()) {
        r.pi = stationary_on_class(tm, r.classes.recurrent_classes.front());
        r.delay = average_delay(r.pi, config);
        r.power = average_power(policy, r.pi, config);
    }
    return r;
}

json point_json(const TradeoffPoint& pt, const RunConfig& cfg) {
    const double t = cfg.slot_seconds();
    json j{{"power_watts", pt.avg_power},
           {"delay_slots", pt.avg_delay},
           {"delay_ms", number_or_null(pt.avg_delay * t * 1e3)},
           {"policy", matrix_json(pt.policy.probs)},
           {"degenerate", {{"f_max", pt.degenerate.f_max}, {"f_min", pt.degenerate.f_min}}},
           {"classes", classes_json(pt.classes)}};
    j["threshold"] = pt.threshold ? json{{"q_star", pt.threshold->q_star}, {"mix_min", pt.threshold->mix_min}}
                                  : json(nullptr);
    return j;
}

Policy load_policy(const std::string& path, const SystemConfig& config) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!doc.contains("policy") || !doc["policy"].is_array()) throw ConfigError(path + ": missing 'policy' matrix");
    const json& rows = doc["policy"];
    Policy p{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                   rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()))};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != static_cast<std::size_t>(p.probs.cols())) {
            throw ConfigError(path + ": policy row " + std::to_string(r) + " has the wrong length");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (!rows[r][c].is_number()) throw ConfigError(path + ": policy entries must be numbers");
            p.probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
        }
    }
    const auto violations = validate_policy(p, config);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw ConfigError(path + ": policy[" + std::to_string(v.q) + "]" +
                          (v.s >= 0 ? "[" + std::to_string(v.s) + "]" : "") + ": " + v.reason);
    }
    return p;
}

int cmd_power_table(const std::string& config_path, const std::string& out_path, std::ostream& out) {
    const RunConfig cfg = load_run_config(config_path);
    if (!cfg.coding) throw ConfigError("power-table: the config needs a 'coding' block");
    echo_notes(cfg, out);
    const PowerTable& table = cfg.system.power_table;
    const bool per_packet_ok = first_per_packet_increase(table.powers) == 0;
    const bool concave = is_discretely_concave(table.powers);

    out << std::setw(4) << "s" << std::setw(20) << "gamma" << std::setw(20) << "P(s) [W]" << std::setw(20)
        << "P(s)/s [W]" << "\n";
    json rows = json::array();
    for (int s = 0; s <= table.max_batch(); ++s) {
        const double per_packet = s ? table.powers[s] / s : 0.0;
        out << std::setw(4) << s << std::setw(20) << format_number(table.gammas[s]) << std::setw(20)
            << format_number(table.powers[s]) << std::setw(20) << (s ? format_number(per_packet) : "-") << "\n";
        rows.push_back({{"s", s},
                        {"gamma", table.gammas[s]},
                        {"power_watts", table.powers[s]},
                        {"per_packet_watts", s ? json(per_packet) : json(nullptr)}});
    }
    out << "per-packet power strictly decreasing: " << (per_packet_ok ? "yes" : "NO") << "\n";
    out << "discretely concave: " << (concave ? "yes" : "no (warning)") << "\n";
    if (!out_path.empty()) {
        json doc{{"rows", rows},
                 {"per_packet_decreasing", per_packet_ok},
                 {"concave", concave},
                 {"config", cfg.source}};
        write_file(out_path, doc.dump(2) + "\n");
    }
    return kOk;
}

int cmd_solve(const std::string& config_path, std::optional<double> p_th_flag, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
    const RunConfig cfg = load_run_config(config_path);
    echo_notes(cfg, out);
    const std::optional<double> p_th = p_th_flag ? p_th_flag : cfg.p_th;
    if (!p_th) throw ConfigError("solve.p_th: missing (set it in the config or pass --p-th)");
    if (*p_th < 0.0) throw ConfigError("--p-th: must be >= 0");
    const SystemConfig& sys = cfg.checked_system();

    TradeoffPoint pt;
    try {
        pt = optimal_point(sys, *p_th);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        out << "p_min_watts: " << format_number(e.min_power()) << "\n";
        return kInfeasible;
    }
    const double p_min = min_feasible_power(sys);
    const DelayFloor floor = min_delay(sys);
    const ChainReport chain = evaluate_chain(pt.policy, sys);
    const double t = cfg.slot_seconds();

    out << "power budget:   " << format_number(*p_th) << " W\n";
    out << "optimal delay:  " << format_number(pt.avg_delay) << " slots";
    if (std::isfinite(t)) out << " (" << format_number(pt.avg_delay * t * 1e3) << " ms)";
    out << "\nachieved power: " << format_number(pt.avg_power) << " W\n";
    out << "p_min:          " << format_number(p_min) << " W\n";
    out << "d_min:          " << format_number(floor.delay) << " slots (reached at " << format_number(floor.power)
        << " W)\n";
    print_policy(pt.policy, sys, out);
    out << "degenerate form (f_min, f_max):\n";
    for (int q = 0; q <= sys.buffer_size; ++q) {
        out << "  q=" << q << ": (" << format_number(pt.degenerate.f_min[q]) << ", "
            << format_number(pt.degenerate.f_max[q]) << ")\n";
    }
    if (pt.threshold) {
        out << "threshold: q* = " << pt.threshold->q_star << ", mix_min = " << format_number(pt.threshold->mix_min)
            << "\n";
    } else {
        out << "threshold: recurrent part is not of threshold form\n";
    }
    out << "recurrent classes:";
    for (const auto& c : chain.classes.recurrent_classes) out << " " << join_states(c);
    out << "; transient: " << join_states(chain.classes.transient) << "\n";
    if (!chain.pi.empty()) {
        out << "stationary distribution:";
        for (double p : chain.pi) out << " " << format_number(p);
        out << "\nchain check: delay " << format_number(chain.delay) << " slots, power "
            << format_number(chain.power) << " W\n";
    }

    if (!out_path.empty()) {
        json doc = point_json(pt, cfg);
        doc["p_th_watts"] = *p_th;
        doc["p_min_watts"] = p_min;
        doc["d_min_slots"] = floor.delay;
        doc["stationary"] = chain.pi;
        doc["chain_delay_slots"] = number_or_null(chain.delay);
        doc["chain_power_watts"] = number_or_null(chain.power);
        doc["config"] = cfg.source;
        write_file(out_path, doc.dump(2) + "\n");
    }
    return kOk;
}

int cmd_curve(const std::string& config_path, const std::string& csv_path, const std::string& vertices_path,
              std::ostream& out) {
    const RunConfig cfg = load_run_config(config_path);
    if (!cfg.sweep) throw ConfigError("sweep: missing (curve needs a 'sweep' block)");
    echo_notes(cfg, out);
    const SystemConfig& sys = cfg.checked_system();
    const TradeoffCurve curve = tradeoff_curve(sys);
    const double t = cfg.slot_seconds();

    const double lo = cfg.sweep->p_min.value_or(curve.p_min);
    const double hi = cfg.sweep->p_max.value_or(curve.vertices.back().avg_power);
    const int n = cfg.sweep->grid_points;

    std::string csv = "p_th_watts,delay_slots,delay_ms,q_star,mix_min\n";
    int skipped = 0;
    for (int k = 0; k < n; ++k) {
        const double p = lo + (hi - lo) * k / (n - 1);
        if (p < curve.p_min) {
            ++skipped;
            continue;
        }
        TradeoffPoint pt = optimal_point(sys, p);
        csv += format_number(p) + "," + format_number(pt.avg_delay) + "," +
               (std::isfinite(t) ? format_number(pt.avg_delay * t * 1e3) : "") + ",";
        if (pt.threshold) {
            csv += std::to_string(pt.threshold->q_star) + "," + format_number(pt.threshold->mix_min);
        } else {
            csv += ",";
        }
        csv += "\n";
    }
    write_file(csv_path, csv);
    if (skipped) out << "note: " << skipped << " grid points below p_min were skipped\n";

    out << "p_min = " << format_number(curve.p_min) << " W, d_min = " << format_number(curve.d_min) << " slots\n";
    out << "vertices (power W, delay slots, q*, mix_min):\n";
    json verts = json::array();
    for (const auto& v : curve.vertices) {
        out << "  " << format_number(v.avg_power) << "  " << format_number(v.avg_delay);
        if (v.threshold) out << "  " << v.threshold->q_star << "  " << format_number(v.threshold->mix_min);
        out << "\n";
        verts.push_back(point_json(v, cfg));
    }
    if (!vertices_path.empty()) {
        json doc{{"p_min_watts", curve.p_min}, {"d_min_slots", curve.d_min}, {"vertices", verts}, {"config", cfg.source}};
        write_file(vertices_path, doc.dump(2) + "\n");
    }
    return kOk;
}

int cmd_simulate(const std::string& config_path, const std::string& policy_path, std::optional<double> p_th_flag,
                 std::ostream& out, std::ostream& err) {
    const RunConfig cfg = load_run_config(config_path);
    if (!cfg.sim) throw ConfigError("sim: missing (simulate needs a 'sim' block)");
    echo_notes(cfg, out);
    const SystemConfig& sys = cfg.checked_system();

    Policy policy;
    if (!policy_path.empty()) {
        policy = load_policy(policy_path, sys);
    } else {
        const std::optional<double> p_th = p_th_flag ? p_th_flag : cfg.p_th;
        if (!p_th) throw ConfigError("simulate: pass --policy, --p-th, or set solve.p_th");
        try {
            policy = optimal_point(sys, *p_th).policy;
        } catch (const InfeasibleError& e) {
            err << "infeasible: " << e.what() << "\n";
            return kInfeasible;
        }
    }

    const SimSettings& s = *cfg.sim;
    const SimulationSpec spec{s.n_slots, s.warmup.value_or(s.n_slots / 100), s.seed, s.initial_q};
    const SimulationResult sim = batch_simulate(policy, sys, spec, s.replicas);
    const ChainReport chain = evaluate_chain(policy, sys);
    const double t = cfg.slot_seconds();

    out << "replicas: " << s.replicas << ", slots per replica: " << s.n_slots << ", warmup: " << spec.warmup_slots
        << ", seed: " << s.seed << "\n";
    out << std::left << std::setw(22) << "" << std::setw(20) << "analytic" << std::setw(20) << "simulated"
        << "stderr\n";
    auto row = [&](const std::string& name, double analytic, double simulated, double se) {
        out << std::setw(22) << name << std::setw(20) << (std::isfinite(analytic) ? format_number(analytic) : "n/a")
            << std::setw(20) << format_number(simulated) << format_number(se) << "\n";
    };
    row("delay [slots]", chain.delay, sim.little_delay, sim.stderr_delay);
    if (std::isfinite(t)) row("delay [ms]", chain.delay * t * 1e3, sim.little_delay * t * 1e3, sim.stderr_delay * t * 1e3);
    row("sojourn (FIFO) [slots]", chain.delay, sim.sojourn_delay, sim.stderr_sojourn);
    row("power [W]", chain.power, sim.mean_power, sim.stderr_power);
    out << std::right;
    out << "packets arrived " << sim.packets_arrived << ", served " << sim.packets_served << "\n";

    if (!chain.classes.unichain()) {
        out << "verdict: n/a (policy has " << chain.classes.recurrent_classes.size()
            << " recurrent classes; no unique analytic value)\n";
        return kOk;
    }
    const bool delay_ok = std::abs(sim.little_delay - chain.delay) <= 3.0 * sim.stderr_delay;
    const bool power_ok = std::abs(sim.mean_power - chain.power) <= 3.0 * sim.stderr_power;
    out << "verdict: " << (delay_ok && power_ok ? "PASS" : "FAIL") << " (3 sigma agreement)\n";
    return delay_ok && power_ok ? kOk : kVerificationFailed;
}

int cmd_verify(const std::string& config_path, std::uint64_t max_policies, std::ostream& out) {
    const RunConfig cfg = load_run_config(config_path);
    echo_notes(cfg, out);
    const SystemConfig& sys = cfg.checked_system();
    const BruteForceResult brute = brute_force_tradeoff(sys, max_policies);
    const TradeoffCurve curve = tradeoff_curve(sys);

    // Power deviations are measured in units of P(S) so the check does not
    // depend on the watt scale of the table.
    const double p_scale = sys.power_table.powers.back();
    out << "deterministic policies: " << brute.policies << ", long-run points: " << brute.points.size() << "\n";
    out << "envelope vertices: " << brute.envelope.size() << ", curve vertices: " << curve.vertices.size() << "\n";
    double worst = 0.0;
    const bool same_count = brute.envelope.size() == curve.vertices.size();
    const std::size_t n = std::max(brute.envelope.size(), curve.vertices.size());
    for (std::size_t k = 0; k < n; ++k) {
        out << "  ";
        if (k < brute.envelope.size()) {
            out << "brute (" << format_number(brute.envelope[k].power) << ", " << format_number(brute.envelope[k].delay)
                << ")";
        }
        if (k < curve.vertices.size()) {
            out << "  lp (" << format_number(curve.vertices[k].avg_power) << ", "
                << format_number(curve.vertices[k].avg_delay) << ")";
        }
        if (k < brute.envelope.size() && k < curve.vertices.size()) {
            worst = std::max(worst, std::abs(brute.envelope[k].power - curve.vertices[k].avg_power) / p_scale);
            worst = std::max(worst, std::abs(brute.envelope[k].delay - curve.vertices[k].avg_delay));
        }
        out << "\n";
    }
    const bool pass = same_count && worst <= 1e-9;
    out << "max deviation: " << format_number(worst) << "\n";
    out << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kOk : kVerificationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Delay-power tradeoff of queue-aware variable-length coding"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string vertices_path;
    std::string policy_path;
    double p_th = 0.0;
    std::uint64_t max_policies = 10'000'000;

    auto* power = app.add_subcommand("power-table", "Finite-blocklength power per batch size");
    power->add_option("--config", config_path, "JSON run configuration")->required();
    power->add_option("--out", out_path, "Write the table as JSON");

    auto* solve = app.add_subcommand("solve", "Delay-optimal policy for one power budget");
    solve->add_option("--config", config_path, "JSON run configuration")->required();
    auto* solve_pth = solve->add_option("--p-th", p_th, "Average power budget in watts");
    solve->add_option("--out", out_path, "Write the policy report as JSON");

    auto* curve = app.add_subcommand("curve", "Trace the delay-power tradeoff curve");
    curve->add_option("--config", config_path, "JSON run configuration")->required();
    curve->add_option("--out", out_path, "CSV output")->required();
    curve->add_option("--vertices", vertices_path, "Write the breakpoints as JSON");

    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo check of a policy");
    simulate->add_option("--config", config_path, "JSON run configuration")->required();
    simulate->add_option("--policy", policy_path, "Policy JSON written by `solve --out`");
    auto* sim_pth = simulate->add_option("--p-th", p_th, "Solve for this budget first");

    auto* verify = app.add_subcommand("verify", "Compare the LP curve with brute-force enumeration");
    verify->add_option("--config", config_path, "JSON run configuration")->required();
    verify->add_option("--max-policies", max_policies, "Enumeration guard");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidationError;
    }

    try {
        if (power->parsed()) return cmd_power_table(config_path, out_path, out);
        if (solve->parsed()) {
            return cmd_solve(config_path, solve_pth->count() ? std::optional<double>(p_th) : std::nullopt, out_path,
                             out, err);
        }
        if (curve->parsed()) return cmd_curve(config_path, out_path, vertices_path, out);
        if (simulate->parsed()) {
            return cmd_simulate(config_path, policy_path,
                                sim_pth->count() ? std::optional<double>(p_th) : std::nullopt, out, err);
        }
        if (verify->parsed()) return cmd_verify(config_path, max_policies, out);
    } catch (const InstanceTooLargeError& e) {
        err << "error: " << e.what() << " (raise --max-policies to force)\n";
        return kValidationError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kValidationError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidationError;
    }
    return kValidationError;
}

}  // namespace qvlc::cli
