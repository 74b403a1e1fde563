#pragma once

// Branch loss-sensitivity factors and candidate-bus ranking.

#include "capplan/errors.hpp"
#include "capplan/network.hpp"
#include "capplan/power_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

namespace capplan {

/// Voltage used to normalise receiving-end magnitudes.
inline constexpr double kNormVoltageBase = 0.95;

struct LossSensitivityRecord
{
    BusId from_bus = 0;
    BusId to_bus = 0;
    /// dP_loss/dQ at the receiving end, per-unit
    double lsf = 0.0;
    BusId end_bus = 0;
    double end_bus_voltage = 0.0;
    double norm_voltage = 0.0;
};

/// Branch loss sensitivity 2 Q r / V^2.
inline double loss_sensitivity_factor(double q_received, double r, double v_end)
{
    return 2.0 * q_received * r / (v_end * v_end);
}

/// One record per branch. The receiving end is the endpoint with the lower
/// voltage magnitude (the to bus on a tie) and Q is the reactive power the
/// branch delivers into it.
inline std::vector<LossSensitivityRecord> loss_sensitivity(const PowerFlowSolution &sol, const Network &net)
{
    if (!sol.converged)
        throw ConvergenceError("loss sensitivity requires a converged power flow");
    const auto flows = sol.branch_flows.size() == net.branches().size()
                           ? sol.branch_flows
                           : compute_branch_flows(net, sol.state);

    std::vector<LossSensitivityRecord> out;
    out.reserve(net.branches().size());
    for (std::size_t k = 0; k < net.branches().size(); ++k) {
        const Branch &br = net.branches()[k];
        const double vf = sol.state.v_mag[net.index_of(br.from_bus)];
        const double vt = sol.state.v_mag[net.index_of(br.to_bus)];
        const bool from_receives = vf < vt;

        LossSensitivityRecord rec;
        rec.from_bus = br.from_bus;
        rec.to_bus = br.to_bus;
        rec.end_bus = from_receives ? br.from_bus : br.to_bus;
        rec.end_bus_voltage = from_receives ? vf : vt;
        const double q_received = -(from_receives ? flows[k].s_from : flows[k].s_to).imag();
        rec.lsf = loss_sensitivity_factor(q_received, br.r, rec.end_bus_voltage);
        rec.norm_voltage = rec.end_bus_voltage / kNormVoltageBase;
        out.push_back(rec);
    }
    return out;
}

struct SensitivityConfig
{
    std::size_t max_candidates = 3;
    /// buses whose normalised voltage is at or above this are not needy
    double norm_threshold = 1.01;

    void validate() const
    {
        if (max_candidates < 1)
            throw ValidationError("max_candidates must be at least 1");
        if (!(norm_threshold > 0.0))
            throw ValidationError("norm_threshold must be positive");
    }
};

struct Candidate
{
    BusId bus = 0;
    /// summed LSF over branches delivering into this bus
    double score = 0.0;
    double voltage = 0.0;

    bool operator==(const Candidate &) const = default;
};

struct CandidateSet
{
    std::vector<Candidate> ranked;

    std::vector<BusId> buses() const
    {
        std::vector<BusId> ids;
        for (const auto &c : ranked)
            ids.push_back(c.bus);
        return ids;
    }
    bool empty() const noexcept { return ranked.empty(); }
    std::size_t size() const noexcept { return ranked.size(); }
};

/// Rank receiving PQ buses by the sum of the LSFs of the branches that
/// deliver into them.
///
/// A bus qualifies when it is PQ, carries positive reactive load (so it has
/// room for a capacitor), has a positive score and sits under the normalised
/// voltage threshold. Ties fall to the lower voltage, then the lower id.
inline CandidateSet select_candidates(const std::vector<LossSensitivityRecord> &records, const Network &net,
                                      const SensitivityConfig &config)
{
    config.validate();
    if (records.empty())
        throw ValidationError("no sensitivity records to rank");

    std::map<BusId, Candidate> best;
    for (const auto &rec : records) {
        const Bus &b = net.bus(rec.end_bus);
        if (b.kind != BusKind::PQ || !(b.q_load > 0.0))
            continue;
        if (!(rec.norm_voltage < config.norm_threshold))
            continue;
        auto [it, inserted] = best.try_emplace(rec.end_bus, Candidate{rec.end_bus, 0.0, rec.end_bus_voltage});
        it->second.score += rec.lsf;
    }

    CandidateSet set;
    for (const auto &[id, c] : best)
        if (c.score > 0.0)
            set.ranked.push_back(c);
    std::sort(set.ranked.begin(), set.ranked.end(), [](const Candidate &a, const Candidate &b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.voltage != b.voltage)
            return a.voltage < b.voltage;
        return a.bus < b.bus;
    });
    if (set.ranked.size() > config.max_candidates)
        set.ranked.resize(config.max_candidates);
    return set;
}

} // namespace capplan
