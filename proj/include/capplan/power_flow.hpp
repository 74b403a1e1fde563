#pragma once

// Full Newton-Raphson AC load flow in polar coordinates.

#include "capplan/errors.hpp"
#include "capplan/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace capplan {

struct PowerFlowState
{
    std::vector<double> v_mag;
    /// radians
    std::vector<double> v_ang;
    int iteration = 0;
};

struct SolverOptions
{
    double tolerance = 1e-6;
    int max_iterations = 20;
    bool flat_start = true;

    void validate() const
    {
        if (!(tolerance > 0.0))
            throw ValidationError("solver tolerance must be positive");
        if (max_iterations < 1)
            throw ValidationError("solver max_iterations must be at least 1");
    }
};

struct BranchFlow
{
    /// power leaving the from bus into the branch
    Complex s_from;
    /// power leaving the to bus into the branch
    Complex s_to;
    /// series-element real loss |I|^2 r
    double p_loss = 0.0;
    double q_loss = 0.0;
};

struct Injections
{
    std::vector<double> p;
    std::vector<double> q;
};

struct PowerFlowSolution
{
    PowerFlowState state;
    std::vector<double> p_inj;
    std::vector<double> q_inj;
    std::vector<BranchFlow> branch_flows;
    /// branch-wise real loss, authoritative
    double p_loss_total = 0.0;
    double q_loss_total = 0.0;
    bool converged = false;
    double max_mismatch = std::numeric_limits<double>::infinity();
    /// max |mismatch| observed before each update, last entry is the final residual
    std::vector<double> mismatch_history;
};

/// Calculated bus injections P_i, Q_i for a voltage state.
inline Injections compute_injections(const AdmittanceMatrix &ybus, const PowerFlowState &state)
{
    const auto n = static_cast<std::size_t>(ybus.rows());
    Injections inj{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        double p = 0.0, q = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const Complex y = ybus(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (y == Complex{})
                continue;
            const double theta = state.v_ang[i] - state.v_ang[j];
            const double vv = state.v_mag[i] * state.v_mag[j];
            const double c = std::cos(theta), s = std::sin(theta);
            p += vv * (y.real() * c + y.imag() * s);
            q += vv * (y.real() * s - y.imag() * c);
        }
        inj.p[i] = p;
        inj.q[i] = q;
    }
    return inj;
}

/// Which bus indices own an angle unknown and which own a magnitude unknown.
/// The unknown vector is [angles of non-slack buses..., magnitudes of PQ buses...].
struct UnknownLayout
{
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> magnitude_buses;

    explicit UnknownLayout(const Network &net)
    {
        for (std::size_t i = 0; i < net.size(); ++i) {
            const auto kind = net.buses()[i].kind;
            if (kind != BusKind::Slack)
                angle_buses.push_back(i);
            if (kind == BusKind::PQ)
                magnitude_buses.push_back(i);
        }
    }
    std::size_t size() const noexcept { return angle_buses.size() + magnitude_buses.size(); }
};

/// Initial state: PQ at 1 pu, slack/PV at setpoint, angles 0 except the slack's
/// specified angle. With flat_start off the stored operating point is used.
inline PowerFlowState initial_state(const Network &net, bool flat_start)
{
    PowerFlowState s;
    s.v_mag.resize(net.size());
    s.v_ang.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
        const Bus &b = net.buses()[i];
        if (b.kind == BusKind::PQ)
            s.v_mag[i] = flat_start ? 1.0 : b.v_start;
        else
            s.v_mag[i] = b.v_setpoint;
        s.v_ang[i] = (flat_start && b.kind != BusKind::Slack) ? 0.0 : b.angle_start;
    }
    return s;
}

/// Specified minus calculated injections over the unknown layout.
inline Eigen::VectorXd compute_mismatch(const Network &net, const AdmittanceMatrix &ybus,
                                        const PowerFlowState &state)
{
    const UnknownLayout layout(net);
    const Injections inj = compute_injections(ybus, state);
    Eigen::VectorXd mm(static_cast<Eigen::Index>(layout.size()));
    Eigen::Index k = 0;
    for (auto i : layout.angle_buses) {
        const Bus &b = net.buses()[i];
        mm(k++) = (b.p_gen - b.p_load) - inj.p[i];
    }
    for (auto i : layout.magnitude_buses) {
        const Bus &b = net.buses()[i];
        mm(k++) = -b.q_load - inj.q[i];
    }
    return mm;
}

/// Jacobian of the calculated injections with respect to the unknowns,
/// blocks [dP/dd dP/dV; dQ/dd dQ/dV] with unscaled magnitude derivatives.
inline Eigen::MatrixXd build_jacobian(const Network &net, const AdmittanceMatrix &ybus,
                                      const PowerFlowState &state)
{
    const UnknownLayout layout(net);
    const Injections inj = compute_injections(ybus, state);
    const auto na = layout.angle_buses.size();
    const auto dim = static_cast<Eigen::Index>(layout.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);

    const auto &V = state.v_mag;
    const auto &d = state.v_ang;
    auto G = [&](std::size_t i, std::size_t j) {
        return ybus(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).real();
    };
    auto B = [&](std::size_t i, std::size_t j) {
        return ybus(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).imag();
    };

    // row r corresponds to equation (P or Q at bus i), column c to unknown (angle or V at bus k)
    auto fill_row = [&](Eigen::Index row, std::size_t i, bool is_p) {
        for (std::size_t c = 0; c < layout.size(); ++c) {
            const bool is_angle = c < na;
            const std::size_t k = is_angle ? layout.angle_buses[c] : layout.magnitude_buses[c - na];
            double value;
            if (k == i) {
                if (is_p)
                    value = is_angle ? -inj.q[i] - B(i, i) * V[i] * V[i] : inj.p[i] / V[i] + G(i, i) * V[i];
                else
                    value = is_angle ? inj.p[i] - G(i, i) * V[i] * V[i] : inj.q[i] / V[i] - B(i, i) * V[i];
            } else {
                const double t = d[i] - d[k];
                const double gc_bs = G(i, k) * std::cos(t) + B(i, k) * std::sin(t);
                const double gs_bc = G(i, k) * std::sin(t) - B(i, k) * std::cos(t);
                if (is_p)
                    value = is_angle ? V[i] * V[k] * gs_bc : V[i] * gc_bs;
                else
                    value = is_angle ? -V[i] * V[k] * gc_bs : V[i] * gs_bc;
            }
            jac(row, static_cast<Eigen::Index>(c)) = value;
        }
    };

    Eigen::Index row = 0;
    for (auto i : layout.angle_buses)
        fill_row(row++, i, true);
    for (auto i : layout.magnitude_buses)
        fill_row(row++, i, false);
    return jac;
}

/// Per-branch terminal powers and series losses for a voltage state.
inline std::vector<BranchFlow> compute_branch_flows(const Network &net, const PowerFlowState &state)
{
    std::vector<BranchFlow> flows;
    flows.reserve(net.branches().size());
    for (const Branch &br : net.branches()) {
        const auto f = net.index_of(br.from_bus), t = net.index_of(br.to_bus);
        const Complex vf = std::polar(state.v_mag[f], state.v_ang[f]);
        const Complex vt = std::polar(state.v_mag[t], state.v_ang[t]);
        const Complex ys = series_admittance(br);
        const Complex half_charging(0.0, br.b_charging / 2.0);
        const Complex i_series = (vf / br.tap - vt) * ys;
        const Complex i_from = (ys / (br.tap * br.tap) + half_charging) * vf - ys / br.tap * vt;
        const Complex i_to = (ys + half_charging) * vt - ys / br.tap * vf;
        BranchFlow fl;
        fl.s_from = vf * std::conj(i_from);
        fl.s_to = vt * std::conj(i_to);
        fl.p_loss = std::norm(i_series) * br.r;
        fl.q_loss = (fl.s_from + fl.s_to).imag();
        flows.push_back(fl);
    }
    return flows;
}

struct LossSummary
{
    /// sum of |I|^2 r over branches
    double p_loss_branches = 0.0;
    /// sum of calculated real injections over buses
    double p_loss_injections = 0.0;
    double q_loss = 0.0;
};

/// Real loss by two independent routes plus the reactive branch loss.
inline LossSummary total_losses(const PowerFlowSolution &sol, const Network &net, const AdmittanceMatrix &ybus)
{
    if (!sol.converged)
        throw ConvergenceError("losses requested for a non-converged power flow");
    LossSummary out;
    for (const auto &fl : compute_branch_flows(net, sol.state)) {
        out.p_loss_branches += fl.p_loss;
        out.q_loss += fl.q_loss;
    }
    for (double p : compute_injections(ybus, sol.state).p)
        out.p_loss_injections += p;
    return out;
}

/// Newton-Raphson load flow.
///
/// Slack magnitude/angle and PV magnitudes are held fixed. Running out of
/// iterations yields converged = false with the last state; a singular
/// Jacobian throws SolverError naming the iteration.
inline PowerFlowSolution solve(const Network &net, const SolverOptions &opts = {})
{
    opts.validate();
    const AdmittanceMatrix ybus = build_ybus(net);
    const UnknownLayout layout(net);
    const auto na = layout.angle_buses.size();

    PowerFlowSolution sol;
    sol.state = initial_state(net, opts.flat_start);
    auto &state = sol.state;

    for (state.iteration = 0;; ++state.iteration) {
        const Eigen::VectorXd mm = compute_mismatch(net, ybus, state);
        const double worst = mm.size() ? mm.cwiseAbs().maxCoeff() : 0.0;
        sol.max_mismatch = worst;
        sol.mismatch_history.push_back(worst);
        if (!std::isfinite(worst))
            break;
        if (worst < opts.tolerance) {
            sol.converged = true;
            break;
        }
        if (state.iteration >= opts.max_iterations)
            break;

        const Eigen::MatrixXd jac = build_jacobian(net, ybus, state);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const double rcond = lu.rcond();
        if (!(rcond > 1e3 * std::numeric_limits<double>::epsilon()))
            throw SolverError("singular Jacobian", state.iteration);
        const Eigen::VectorXd dx = lu.solve(mm);

        for (std::size_t c = 0; c < na; ++c)
            state.v_ang[layout.angle_buses[c]] += dx(static_cast<Eigen::Index>(c));
        for (std::size_t c = 0; c < layout.magnitude_buses.size(); ++c)
            state.v_mag[layout.magnitude_buses[c]] += dx(static_cast<Eigen::Index>(na + c));
    }

    const Injections inj = compute_injections(ybus, state);
    sol.p_inj = inj.p;
    sol.q_inj = inj.q;
    if (std::all_of(state.v_mag.begin(), state.v_mag.end(), [](double v) { return std::isfinite(v); })) {
        sol.branch_flows = compute_branch_flows(net, state);
        for (const auto &fl : sol.branch_flows) {
            sol.p_loss_total += fl.p_loss;
            sol.q_loss_total += fl.q_loss;
        }
    }
    return sol;
}

} // namespace capplan
