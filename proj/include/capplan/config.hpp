#pragma once

// Run configuration document (JSON). Every key is optional; unknown keys are
// rejected so typos do not silently fall back to defaults.

#include "capplan/errors.hpp"
#include "capplan/io.hpp"
#include "capplan/placement.hpp"
#include "capplan/report.hpp"

#include <json.hpp>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace capplan {

struct RunConfig
{
    std::string network_path;
    Tariffs tariffs;
    SolverOptions solver;
    pso::PsoParams pso;
    SensitivityConfig sensitivity;
    PlacementOptions placement;
    double v_min = 0.95;
    double v_max = 1.06;
    std::string output_dir;
    std::vector<ReportFormat> formats{ReportFormat::Table};

    void validate() const
    {
        tariffs.validate();
        solver.validate();
        pso.validate();
        sensitivity.validate();
        if (!(v_min < v_max))
            throw ValidationError("voltage_limits: v_min must be below v_max");
        if (placement.round_to_bank && !(placement.bank_step_mvar > 0.0))
            throw ValidationError("bank_step_mvar must be positive");
        if (formats.empty())
            throw ValidationError("at least one output format is required");
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json &obj, const std::string &where,
                           std::initializer_list<const char *> allowed)
{
    if (!obj.is_object())
        throw ValidationError("config: '" + where + "' must be an object");
    for (const auto &[key, value] : obj.items()) {
        bool known = false;
        for (const char *a : allowed)
            known = known || key == a;
        if (!known)
            throw ValidationError("config: unknown key '" + where + "." + key + "'");
    }
}

} // namespace detail

/// Read a configuration document over the defaults.
inline RunConfig parse_config(const nlohmann::json &doc)
{
    RunConfig cfg;
    try {
        detail::reject_unknown(doc, "", {"tariffs", "voltage_limits", "solver", "pso", "sensitivity", "penalty",
                                         "capacitor_bank"});
        if (doc.contains("tariffs")) {
            const auto &t = doc["tariffs"];
            detail::reject_unknown(t, "tariffs", {"k_p", "k_c"});
            cfg.tariffs.k_p = t.value("k_p", cfg.tariffs.k_p);
            cfg.tariffs.k_c = t.value("k_c", cfg.tariffs.k_c);
        }
        if (doc.contains("voltage_limits")) {
            const auto &v = doc["voltage_limits"];
            detail::reject_unknown(v, "voltage_limits", {"v_min", "v_max"});
            cfg.v_min = v.value("v_min", cfg.v_min);
            cfg.v_max = v.value("v_max", cfg.v_max);
        }
        if (doc.contains("solver")) {
            const auto &s = doc["solver"];
            detail::reject_unknown(s, "solver", {"tolerance", "max_iterations", "flat_start"});
            cfg.solver.tolerance = s.value("tolerance", cfg.solver.tolerance);
            cfg.solver.max_iterations = s.value("max_iterations", cfg.solver.max_iterations);
            cfg.solver.flat_start = s.value("flat_start", cfg.solver.flat_start);
        }
        if (doc.contains("pso")) {
            const auto &p = doc["pso"];
            detail::reject_unknown(p, "pso", {"swarm_size", "max_iterations", "c1", "c2", "w_start", "w_end",
                                              "v_max_fraction", "seed"});
            cfg.pso.swarm_size = p.value("swarm_size", cfg.pso.swarm_size);
            cfg.pso.max_iterations = p.value("max_iterations", cfg.pso.max_iterations);
            cfg.pso.c1 = p.value("c1", cfg.pso.c1);
            cfg.pso.c2 = p.value("c2", cfg.pso.c2);
            cfg.pso.w_start = p.value("w_start", cfg.pso.w_start);
            cfg.pso.w_end = p.value("w_end", cfg.pso.w_end);
            cfg.pso.v_max_fraction = p.value("v_max_fraction", cfg.pso.v_max_fraction);
            cfg.pso.seed = p.value("seed", cfg.pso.seed);
        }
        if (doc.contains("sensitivity")) {
            const auto &s = doc["sensitivity"];
            detail::reject_unknown(s, "sensitivity", {"max_candidates", "norm_threshold"});
            cfg.sensitivity.max_candidates = s.value("max_candidates", cfg.sensitivity.max_candidates);
            cfg.sensitivity.norm_threshold = s.value("norm_threshold", cfg.sensitivity.norm_threshold);
        }
        if (doc.contains("penalty")) {
            const auto &w = doc["penalty"];
            detail::reject_unknown(w, "penalty", {"voltage", "capacity", "flow", "divergence"});
            auto &pw = cfg.placement.weights;
            pw.voltage = w.value("voltage", pw.voltage);
            pw.capacity = w.value("capacity", pw.capacity);
            pw.flow = w.value("flow", pw.flow);
            pw.divergence = w.value("divergence", pw.divergence);
        }
        if (doc.contains("capacitor_bank")) {
            const auto &b = doc["capacitor_bank"];
            detail::reject_unknown(b, "capacitor_bank", {"round", "step_mvar"});
            cfg.placement.round_to_bank = b.value("round", cfg.placement.round_to_bank);
            cfg.placement.bank_step_mvar = b.value("step_mvar", cfg.placement.bank_step_mvar);
        }
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

/// `path` may be the literal "default" for the built-in configuration.
inline RunConfig load_config(const std::string &path)
{
    if (path.empty() || path == "default")
        return RunConfig{};
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error &e) {
        throw ValidationError("config '" + path + "': " + e.what());
    }
    return parse_config(doc);
}

/// The effective configuration, echoed into structured reports.
inline nlohmann::json to_json(const RunConfig &cfg)
{
    return {
        {"tariffs", {{"k_p", cfg.tariffs.k_p}, {"k_c", cfg.tariffs.k_c}}},
        {"voltage_limits", {{"v_min", cfg.v_min}, {"v_max", cfg.v_max}}},
        {"solver",
         {{"tolerance", cfg.solver.tolerance},
          {"max_iterations", cfg.solver.max_iterations},
          {"flat_start", cfg.solver.flat_start}}},
        {"pso",
         {{"swarm_size", cfg.pso.swarm_size},
          {"max_iterations", cfg.pso.max_iterations},
          {"c1", cfg.pso.c1},
          {"c2", cfg.pso.c2},
          {"w_start", cfg.pso.w_start},
          {"w_end", cfg.pso.w_end},
          {"v_max_fraction", cfg.pso.v_max_fraction},
          {"seed", cfg.pso.seed}}},
        {"sensitivity",
         {{"max_candidates", cfg.sensitivity.max_candidates},
          {"norm_threshold", cfg.sensitivity.norm_threshold}}},
        {"penalty",
         {{"voltage", cfg.placement.weights.voltage},
          {"capacity", cfg.placement.weights.capacity},
          {"flow", cfg.placement.weights.flow},
          {"divergence", cfg.placement.weights.divergence}}},
        {"capacitor_bank",
         {{"round", cfg.placement.round_to_bank}, {"step_mvar", cfg.placement.bank_step_mvar}}},
    };
}

} // namespace capplan
