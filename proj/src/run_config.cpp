#include "qvlc/run_config.hpp"

#include "qvlc/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace qvlc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) { throw ConfigError(path + ": " + why); }

void only_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(path, "must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
    }
}

const json& need(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) fail(path + "." + key, "missing");
    return obj.at(key);
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
}

std::int64_t integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "must be an integer");
    return v.get<std::int64_t>();
}

std::string fmt(double x) {
    std::ostringstream out;
    out.precision(12);
    out << x;
    return out.str();
}

}  // namespace

double parse_quantity(const json& value, Quantity kind, const std::string& path, std::vector<std::string>* notes) {
    if (value.is_number()) return number(value, path);
    if (!value.is_string()) fail(path, "must be a number or a string with a unit suffix");

    const std::string text = value.get<std::string>();
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    double x = 0.0;
    std::string unit;
    if (!(in >> x >> unit) || !std::isfinite(x)) fail(path, "cannot parse '" + text + "'");
    std::string rest;
    if (in >> rest) fail(path, "trailing text in '" + text + "'");

    double si = std::numeric_limits<double>::quiet_NaN();
    switch (kind) {
        case Quantity::Time:
            if (unit == "s") si = x;
            if (unit == "ms") si = x * 1e-3;
            if (unit == "us") si = x * 1e-6;
            break;
        case Quantity::Frequency:
            if (unit == "Hz") si = x;
            if (unit == "kHz") si = x * 1e3;
            if (unit == "MHz") si = x * 1e6;
            break;
        case Quantity::NoiseDensity:
            if (unit == "W_per_Hz") si = x;
            if (unit == "dBm_per_Hz") si = std::pow(10.0, (x - 30.0) / 10.0);
            if (unit == "dBW_per_Hz") si = std::pow(10.0, x / 10.0);
            break;
    }
    if (std::isnan(si)) fail(path, "unsupported unit '" + unit + "'");
    if (notes) notes->push_back(path + " = " + fmt(si) + " (from '" + text + "')");
    return si;
}

double RunConfig::slot_seconds() const {
    return slot_duration.value_or(std::numeric_limits<double>::quiet_NaN());
}

RunConfig parse_run_config(const json& doc) {
    only_keys(doc, "", {"arrival", "buffer", "coding", "power_table", "solve", "sweep", "sim"});
    RunConfig cfg;
    cfg.source = doc;

    const json& arrival = need(doc, "arrival", "");
    only_keys(arrival, "arrival", {"A", "alpha"});
    cfg.system.arrival_batch = static_cast<int>(integer(need(arrival, "A", "arrival"), "arrival.A"));
    cfg.system.arrival_prob = number(need(arrival, "alpha", "arrival"), "arrival.alpha");

    const json& buffer = need(doc, "buffer", "");
    only_keys(buffer, "buffer", {"Q"});
    cfg.system.buffer_size = static_cast<int>(integer(need(buffer, "Q", "buffer"), "buffer.Q"));

    const bool has_coding = doc.contains("coding");
    const bool has_table = doc.contains("power_table");
    if (has_coding == has_table) fail("coding|power_table", "exactly one of the two blocks must be present");

    if (has_coding) {
        const json& c = doc.at("coding");
        only_keys(c, "coding", {"S", "T_seconds", "B_hertz", "L_bits", "epsilon", "N0_watts_per_hertz"});
        CodingParams p;
        p.max_batch = static_cast<int>(integer(need(c, "S", "coding"), "coding.S"));
        p.slot_duration = parse_quantity(need(c, "T_seconds", "coding"), Quantity::Time, "coding.T_seconds", &cfg.notes);
        p.bandwidth = parse_quantity(need(c, "B_hertz", "coding"), Quantity::Frequency, "coding.B_hertz", &cfg.notes);
        p.packet_bits = static_cast<double>(integer(need(c, "L_bits", "coding"), "coding.L_bits"));
        p.error_prob = number(need(c, "epsilon", "coding"), "coding.epsilon");
        p.noise_density = parse_quantity(need(c, "N0_watts_per_hertz", "coding"), Quantity::NoiseDensity,
                                         "coding.N0_watts_per_hertz", &cfg.notes);
        p.validate();
        cfg.coding = p;
        cfg.slot_duration = p.slot_duration;
        cfg.system.max_batch = p.max_batch;
        cfg.system.power_table = build_power_table(p);
    } else {
        const json& t = doc.at("power_table");
        only_keys(t, "power_table", {"powers", "T_seconds"});
        if (t.contains("T_seconds")) {
            cfg.slot_duration = parse_quantity(t.at("T_seconds"), Quantity::Time, "power_table.T_seconds", &cfg.notes);
            if (!(*cfg.slot_duration > 0.0)) fail("power_table.T_seconds", "must be > 0");
        }
        const json& list = need(t, "powers", "power_table");
        if (!list.is_array()) fail("power_table.powers", "must be an array");
        std::vector<double> powers;
        for (std::size_t k = 0; k < list.size(); ++k) {
            powers.push_back(number(list[k], "power_table.powers[" + std::to_string(k) + "]"));
        }
        cfg.system.power_table = PowerTable::from_powers(std::move(powers));
        cfg.system.max_batch = cfg.system.power_table.max_batch();
    }
    try {
        cfg.system.validate();
    } catch (const ConfigError& e) {
        // power-table still works for S = 0; every other workflow needs a valid system.
        cfg.system_issue = e.what();
    }

    if (doc.contains("solve")) {
        const json& s = doc.at("solve");
        only_keys(s, "solve", {"p_th"});
        if (s.contains("p_th")) {
            cfg.p_th = number(s.at("p_th"), "solve.p_th");
            if (*cfg.p_th < 0.0) fail("solve.p_th", "must be >= 0");
        }
    }
    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        only_keys(s, "sweep", {"p_min", "p_max", "grid_points"});
        SweepSettings sw;
        if (s.contains("p_min")) sw.p_min = number(s.at("p_min"), "sweep.p_min");
        if (s.contains("p_max")) sw.p_max = number(s.at("p_max"), "sweep.p_max");
        if (s.contains("grid_points")) sw.grid_points = static_cast<int>(integer(s.at("grid_points"), "sweep.grid_points"));
        if (sw.grid_points < 2) fail("sweep.grid_points", "must be >= 2");
        if (sw.p_min && sw.p_max && *sw.p_max < *sw.p_min) fail("sweep.p_max", "must be >= sweep.p_min");
        cfg.sweep = sw;
    }
    if (doc.contains("sim")) {
        const json& s = doc.at("sim");
        only_keys(s, "sim", {"n_slots", "warmup", "seed", "replicas", "initial_q"});
        SimSettings sim;
        if (s.contains("n_slots")) sim.n_slots = integer(s.at("n_slots"), "sim.n_slots");
        if (s.contains("warmup")) sim.warmup = integer(s.at("warmup"), "sim.warmup");
        if (s.contains("seed")) {
            if (!s.at("seed").is_number_integer()) fail("sim.seed", "must be an integer");
            sim.seed = s.at("seed").get<std::uint64_t>();
        }
        if (s.contains("replicas")) sim.replicas = static_cast<int>(integer(s.at("replicas"), "sim.replicas"));
        if (s.contains("initial_q")) sim.initial_q = static_cast<int>(integer(s.at("initial_q"), "sim.initial_q"));
        if (sim.n_slots < 1) fail("sim.n_slots", "must be >= 1");
        const std::int64_t warm = sim.warmup.value_or(sim.n_slots / 100);
        if (warm < 0 || warm >= sim.n_slots) fail("sim.warmup", "must satisfy 0 <= warmup < n_slots");
        if (sim.replicas < 1) fail("sim.replicas", "must be >= 1");
        if (sim.initial_q < 0 || sim.initial_q > cfg.system.buffer_size) fail("sim.initial_q", "must lie in [0, Q]");
        cfg.sim = sim;
    }
    return cfg;
}

const SystemConfig& RunConfig::checked_system() const {
    if (system_issue) throw ConfigError(*system_issue);
    return system;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config(doc);
}

}  // namespace qvlc
