#pragma once

// Capacitor placement: annual cost objective, constraint penalties and the
// sensitivity -> PSO -> report pipeline.

#include "capplan/errors.hpp"
#include "capplan/network.hpp"
#include "capplan/power_flow.hpp"
#include "capplan/pso.hpp"
#include "capplan/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capplan {

/// Annual tariffs. k_p in $/kW/year of real loss, k_c in $/kVar/year of installed capacitor.
struct Tariffs
{
    double k_p = 168.0;
    double k_c = 4.9;

    void validate() const
    {
        if (!(k_p > 0.0))
            throw ValidationError("k_p must be positive");
        if (!(k_c >= 0.0))
            throw ValidationError("k_c must be non-negative");
    }
};

struct PenaltyWeights
{
    double voltage = 1e6;
    double capacity = 1e6;
    double flow = 1e6;
    /// fitness assigned to plans whose power flow does not converge
    double divergence = 1e9;
};

inline double pu_to_kw(double pu, double base_mva) { return pu * base_mva * 1000.0; }

/// Yearly cost in $ of a loss level and installed capacitance: k_p * P[kW] + k_c * Q[kVar].
inline double annual_cost(const Tariffs &tariffs, double p_loss_kw, double q_kvar)
{
    return tariffs.k_p * p_loss_kw + tariffs.k_c * q_kvar;
}

struct CostReport
{
    bool converged = false;
    double p_loss_pu = 0.0;
    double p_loss_kw = 0.0;
    double loss_cost = 0.0;
    double capacitor_cost = 0.0;
    double total_cost = 0.0;
    double min_voltage = 0.0;
    double max_voltage = 0.0;
    double penalty = 0.0;
    bool feasible = false;

    // constraint data, per bus and per branch in network order
    std::vector<BusId> bus_ids;
    std::vector<double> bus_voltage;
    std::vector<double> v_min_limit;
    std::vector<double> v_max_limit;
    double q_installed_pu = 0.0;
    double q_total_pu = 0.0;
    std::vector<double> branch_flow;
    std::vector<std::optional<double>> flow_limit;
};

/// Unweighted squared constraint violations.
struct ConstraintViolation
{
    double voltage = 0.0;
    double capacity = 0.0;
    double flow = 0.0;
};

inline ConstraintViolation constraint_violation(const CostReport &report)
{
    ConstraintViolation out;
    for (std::size_t i = 0; i < report.bus_voltage.size(); ++i) {
        const double v = report.bus_voltage[i];
        const double excess = std::max({0.0, report.v_min_limit[i] - v, v - report.v_max_limit[i]});
        out.voltage += excess * excess;
    }
    const double over = std::max(0.0, report.q_installed_pu - report.q_total_pu);
    out.capacity = over * over;
    for (std::size_t k = 0; k < report.branch_flow.size(); ++k) {
        if (!report.flow_limit[k])
            continue;
        const double e = std::max(0.0, report.branch_flow[k] - *report.flow_limit[k]);
        out.flow += e * e;
    }
    return out;
}

/// Weighted penalty on top of total_cost; the divergence value when the flow failed.
inline double penalty_value(const CostReport &report, const PenaltyWeights &weights)
{
    if (!report.converged)
        return weights.divergence;
    const auto v = constraint_violation(report);
    return weights.voltage * v.voltage + weights.capacity * v.capacity + weights.flow * v.flow;
}

inline double penalized_fitness(const CostReport &report, const PenaltyWeights &weights = {})
{
    if (!report.converged)
        return weights.divergence;
    return report.total_cost + penalty_value(report, weights);
}

/// Install `plan`, run the load flow and price the result.
///
/// Cost = k_p * P_loss[kW] + k_c * sum(Q_c)[kVar]. A flow that fails to
/// converge (or hits a singular Jacobian) yields converged = false with the
/// divergence penalty.
inline CostReport evaluate_plan(const Network &net, const CapacitorPlan &plan, const Tariffs &tariffs,
                                const SolverOptions &solver_options, const PenaltyWeights &weights = {})
{
    tariffs.validate();
    const Network compensated = apply_capacitors(net, plan);

    CostReport report;
    report.q_installed_pu = plan.total_pu();
    report.q_total_pu = reactive_capacity(net);
    report.capacitor_cost = annual_cost(tariffs, 0.0, pu_to_kw(report.q_installed_pu, net.base_mva()));
    for (const auto &b : net.buses()) {
        report.bus_ids.push_back(b.id);
        report.v_min_limit.push_back(b.v_min);
        report.v_max_limit.push_back(b.v_max);
    }

    PowerFlowSolution sol;
    try {
        sol = solve(compensated, solver_options);
    } catch (const SolverError &) {
        sol.converged = false;
    }

    if (!sol.converged) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        report.converged = false;
        report.p_loss_pu = report.p_loss_kw = report.loss_cost = report.total_cost = nan;
        report.min_voltage = report.max_voltage = nan;
        report.penalty = weights.divergence;
        report.feasible = false;
        return report;
    }

    report.converged = true;
    report.p_loss_pu = sol.p_loss_total;
    report.p_loss_kw = pu_to_kw(sol.p_loss_total, net.base_mva());
    report.loss_cost = annual_cost(tariffs, report.p_loss_kw, 0.0);
    report.total_cost = report.loss_cost + report.capacitor_cost;
    report.bus_voltage = sol.state.v_mag;
    report.min_voltage = *std::min_element(sol.state.v_mag.begin(), sol.state.v_mag.end());
    report.max_voltage = *std::max_element(sol.state.v_mag.begin(), sol.state.v_mag.end());
    for (std::size_t k = 0; k < net.branches().size(); ++k) {
        const auto &fl = sol.branch_flows[k];
        report.branch_flow.push_back(std::max(std::abs(fl.s_from), std::abs(fl.s_to)));
        report.flow_limit.push_back(net.branches()[k].flow_limit);
    }
    report.penalty = penalty_value(report, weights);
    report.feasible = report.penalty == 0.0;
    return report;
}

struct PlacementOptions
{
    PenaltyWeights weights;
    /// snap the optimised sizes down/up to multiples of this bank size
    bool round_to_bank = false;
    double bank_step_mvar = 0.05;
};

struct PlacementResult
{
    CapacitorPlan plan;
    CostReport before;
    CostReport after;
    CandidateSet candidate_buses;
    std::vector<LossSensitivityRecord> sensitivity;
    /// per-candidate upper size bound, per-unit
    std::vector<double> size_limits;
    std::vector<double> trace;
    std::uint64_t seed = 0;
    std::size_t evaluations = 0;
    bool voltage_screen_relaxed = false;
    std::vector<std::string> diagnostics;
};

/// Round each size to the nearest bank multiple without leaving [0, limit].
inline double round_to_bank(double q_pu, double limit_pu, double step_pu)
{
    double q = std::round(q_pu / step_pu) * step_pu;
    if (q > limit_pu)
        q = std::floor(limit_pu / step_pu) * step_pu;
    return std::max(0.0, q);
}

/// Base case, sensitivity ranking, PSO sizing and the compensated report.
///
/// The decision vector holds one size per candidate bus, boxed by that bus's
/// reactive load. When the voltage screen rejects every bus the ranking is
/// repeated without it and a diagnostic is recorded.
inline PlacementResult run_placement(const Network &net, const Tariffs &tariffs,
                                     const SensitivityConfig &sensitivity_config, const pso::PsoParams &pso_params,
                                     const SolverOptions &solver_options, const PlacementOptions &options = {})
{
    tariffs.validate();
    sensitivity_config.validate();
    pso_params.validate();
    solver_options.validate();

    PlacementResult result;
    result.seed = pso_params.seed;

    const PowerFlowSolution base = solve(net, solver_options);
    if (!base.converged)
        throw ConvergenceError("base case power flow did not converge after " +
                               std::to_string(base.state.iteration) + " iterations");
    result.before = evaluate_plan(net, {}, tariffs, solver_options, options.weights);
    result.after = result.before;

    result.sensitivity = loss_sensitivity(base, net);
    result.candidate_buses = select_candidates(result.sensitivity, net, sensitivity_config);
    if (result.candidate_buses.empty()) {
        auto relaxed = sensitivity_config;
        relaxed.norm_threshold = std::numeric_limits<double>::infinity();
        result.candidate_buses = select_candidates(result.sensitivity, net, relaxed);
        result.voltage_screen_relaxed = true;
        result.diagnostics.push_back("no bus below normalised voltage " +
                                     std::to_string(sensitivity_config.norm_threshold) +
                                     "; candidates ranked by sensitivity alone");
    }
    if (result.candidate_buses.empty()) {
        result.diagnostics.push_back("no bus has a positive loss sensitivity; nothing to compensate");
        return result;
    }

    const auto buses = result.candidate_buses.buses();
    std::vector<pso::Bounds> bounds;
    for (BusId id : buses) {
        const double limit = net.bus(id).q_load;
        result.size_limits.push_back(limit);
        bounds.push_back({0.0, limit});
    }

    auto to_plan = [&](std::span<const double> x) {
        CapacitorPlan plan;
        for (std::size_t i = 0; i < buses.size(); ++i)
            plan.q_pu[buses[i]] = x[i];
        return plan;
    };
    auto fitness = [&](std::span<const double> x) {
        return penalized_fitness(evaluate_plan(net, to_plan(x), tariffs, solver_options, options.weights),
                                 options.weights);
    };

    const auto opt = pso::optimize(fitness, bounds, pso_params);
    result.trace = opt.history;
    result.evaluations = opt.evaluations;

    std::vector<double> best = opt.gbest_position;
    if (options.round_to_bank) {
        const double step = options.bank_step_mvar / net.base_mva();
        for (std::size_t i = 0; i < best.size(); ++i)
            best[i] = round_to_bank(best[i], result.size_limits[i], step);
    }
    CapacitorPlan plan = to_plan(best);
    CostReport after = evaluate_plan(net, plan, tariffs, solver_options, options.weights);

    if (penalized_fitness(after, options.weights) > penalized_fitness(result.before, options.weights)) {
        result.diagnostics.push_back("optimised plan is worse than no compensation; keeping the base case");
        for (auto &[id, q] : plan.q_pu)
            q = 0.0;
        after = result.before;
    }
    if (!after.feasible)
        result.diagnostics.push_back("best plan violates operating constraints (penalty " +
                                     std::to_string(after.penalty) + ")");
    result.plan = std::move(plan);
    result.after = std::move(after);
    return result;
}

} // namespace capplan
