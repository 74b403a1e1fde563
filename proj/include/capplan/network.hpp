#pragma once

// Per-unit network model: buses, branches, nodal admittance assembly and
// shunt-capacitor installation.

#include "capplan/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace capplan {

using BusId = int;
using Complex = std::complex<double>;
using AdmittanceMatrix = Eigen::MatrixXcd;

enum class BusKind { Slack, PV, PQ };

inline const char *to_string(BusKind kind)
{
    switch (kind) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "pv";
    case BusKind::PQ: return "pq";
    }
    return "?";
}

/// One network node. All powers are per-unit on the network MVA base.
struct Bus
{
    BusId id = 0;
    BusKind kind = BusKind::PQ;
    double p_load = 0.0;
    double q_load = 0.0;
    double p_gen = 0.0;
    /// voltage magnitude held by slack and PV buses
    double v_setpoint = 1.0;
    /// fixed shunt susceptance, positive for capacitive
    double shunt_b = 0.0;
    double v_min = 0.95;
    double v_max = 1.06;
    /// stored operating point from the source document, used for non-flat starts
    double v_start = 1.0;
    double angle_start = 0.0;
    std::string name;

    bool operator==(const Bus &) const = default;
};

struct Branch
{
    BusId from_bus = 0;
    BusId to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    /// total line charging; half is placed at each end
    double b_charging = 0.0;
    /// off-nominal turns ratio on the from side
    double tap = 1.0;
    std::optional<double> flow_limit;

    bool operator==(const Branch &) const = default;
};

/// Immutable, validated network. Bus order defines matrix indices.
class Network
{
public:
    Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches)
        : base_mva_(base_mva), buses_(std::move(buses)), branches_(std::move(branches))
    {
        validate();
    }

    double base_mva() const noexcept { return base_mva_; }
    const std::vector<Bus> &buses() const noexcept { return buses_; }
    const std::vector<Branch> &branches() const noexcept { return branches_; }
    std::size_t size() const noexcept { return buses_.size(); }

    std::size_t index_of(BusId id) const
    {
        auto it = index_.find(id);
        if (it == index_.end())
            throw ValidationError("unknown bus " + std::to_string(id));
        return it->second;
    }
    bool contains(BusId id) const { return index_.count(id) != 0; }
    const Bus &bus(BusId id) const { return buses_[index_of(id)]; }
    std::size_t slack_index() const noexcept { return slack_; }

    std::size_t count(BusKind kind) const
    {
        std::size_t n = 0;
        for (const auto &b : buses_)
            n += b.kind == kind;
        return n;
    }

    /// Copy with every bus's voltage limits replaced.
    Network with_voltage_limits(double v_min, double v_max) const
    {
        auto buses = buses_;
        for (auto &b : buses) {
            b.v_min = v_min;
            b.v_max = v_max;
        }
        return Network(base_mva_, std::move(buses), branches_);
    }

    bool operator==(const Network &o) const
    {
        return base_mva_ == o.base_mva_ && buses_ == o.buses_ && branches_ == o.branches_;
    }

private:
    void validate()
    {
        if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_))
            throw ValidationError("base MVA must be positive");
        if (buses_.empty())
            throw ValidationError("network has no buses");

        std::size_t slack_count = 0;
        for (std::size_t i = 0; i < buses_.size(); ++i) {
            const Bus &b = buses_[i];
            if (b.id <= 0)
                throw ValidationError("bus id must be positive, got " + std::to_string(b.id));
            if (!index_.emplace(b.id, i).second)
                throw ValidationError("duplicate bus id " + std::to_string(b.id));
            if (b.kind == BusKind::Slack) {
                ++slack_count;
                slack_ = i;
            }
            for (double v : {b.p_load, b.q_load, b.p_gen, b.shunt_b, b.v_start, b.angle_start})
                if (!std::isfinite(v))
                    throw ValidationError("bus " + std::to_string(b.id) + " has a non-finite value");
            if (!(b.v_min < b.v_max))
                throw ValidationError("bus " + std::to_string(b.id) + " has v_min >= v_max");
            if (b.kind != BusKind::PQ && !(b.v_setpoint > 0.0))
                throw ValidationError("bus " + std::to_string(b.id) + " needs a positive voltage setpoint");
        }
        if (slack_count != 1)
            throw ValidationError("network must have exactly one slack bus, found " +
                                  std::to_string(slack_count));

        for (const Branch &br : branches_) {
            for (BusId end : {br.from_bus, br.to_bus})
                if (!index_.count(end))
                    throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                          std::to_string(br.to_bus) + " references unknown bus " +
                                          std::to_string(end));
            if (br.from_bus == br.to_bus)
                throw ValidationError("branch connects bus " + std::to_string(br.from_bus) + " to itself");
            if (br.r < 0.0 || !std::isfinite(br.r) || !std::isfinite(br.x) || !std::isfinite(br.b_charging))
                throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                      std::to_string(br.to_bus) + " has invalid impedance");
            if (!(br.tap > 0.0))
                throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                      std::to_string(br.to_bus) + " has non-positive tap");
            if (br.flow_limit && !(*br.flow_limit > 0.0))
                throw ValidationError("branch flow limit must be positive");
        }

        // islands make the load flow singular
        std::vector<std::vector<std::size_t>> adj(buses_.size());
        for (const Branch &br : branches_) {
            auto a = index_.at(br.from_bus), b = index_.at(br.to_bus);
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<bool> seen(buses_.size(), false);
        std::queue<std::size_t> todo;
        todo.push(slack_);
        seen[slack_] = true;
        std::size_t reached = 1;
        while (!todo.empty()) {
            auto k = todo.front();
            todo.pop();
            for (auto m : adj[k])
                if (!seen[m]) {
                    seen[m] = true;
                    ++reached;
                    todo.push(m);
                }
        }
        if (reached != buses_.size()) {
            for (std::size_t i = 0; i < buses_.size(); ++i)
                if (!seen[i])
                    throw ValidationError("bus " + std::to_string(buses_[i].id) +
                                          " is not connected to the slack bus");
        }
    }

    double base_mva_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::unordered_map<BusId, std::size_t> index_;
    std::size_t slack_ = 0;
};

/// Series admittance 1/(r + jx); throws on a zero-impedance element.
inline Complex series_admittance(const Branch &br)
{
    if (br.r == 0.0 && br.x == 0.0)
        throw ValidationError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                              " has zero impedance (singular element)");
    return 1.0 / Complex(br.r, br.x);
}

/// Assemble the dense nodal admittance matrix.
///
/// Off-nominal taps sit on the from side: the from-side diagonal receives
/// y/t^2, the to-side y, and both off-diagonals -y/t. Half the line charging
/// goes to each endpoint and bus shunts land on their own diagonal.
inline AdmittanceMatrix build_ybus(const Network &net)
{
    const auto n = static_cast<Eigen::Index>(net.size());
    AdmittanceMatrix y = AdmittanceMatrix::Zero(n, n);
    for (const Branch &br : net.branches()) {
        const Complex ys = series_admittance(br);
        const Complex half_charging(0.0, br.b_charging / 2.0);
        const auto f = static_cast<Eigen::Index>(net.index_of(br.from_bus));
        const auto t = static_cast<Eigen::Index>(net.index_of(br.to_bus));
        y(f, f) += ys / (br.tap * br.tap) + half_charging;
        y(t, t) += ys + half_charging;
        y(f, t) -= ys / br.tap;
        y(t, f) -= ys / br.tap;
    }
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        y(k, k) += Complex(0.0, net.buses()[i].shunt_b);
    }
    return y;
}

/// Shunt capacitor sizes per bus, per-unit reactive power at 1 pu voltage.
struct CapacitorPlan
{
    std::map<BusId, double> q_pu;

    double total_pu() const
    {
        double s = 0.0;
        for (const auto &[bus, q] : q_pu)
            s += q;
        return s;
    }
    bool empty() const noexcept { return q_pu.empty(); }

    bool operator==(const CapacitorPlan &) const = default;
};

/// Returns a copy of `net` with each planned capacitor added to its bus shunt.
inline Network apply_capacitors(const Network &net, const CapacitorPlan &plan)
{
    auto buses = net.buses();
    for (const auto &[id, q] : plan.q_pu) {
        if (!net.contains(id))
            throw ValidationError("capacitor plan references unknown bus " + std::to_string(id));
        if (!(q >= 0.0) || !std::isfinite(q))
            throw ValidationError("capacitor size at bus " + std::to_string(id) + " must be non-negative");
        auto &b = buses[net.index_of(id)];
        if (b.kind != BusKind::PQ)
            throw ValidationError("capacitors may only be placed at PQ buses, bus " + std::to_string(id) +
                                  " is " + to_string(b.kind));
        b.shunt_b += q;
    }
    return Network(net.base_mva(), std::move(buses), net.branches());
}

/// Aggregate capacitor ceiling: total positive reactive demand over PQ buses.
inline double reactive_capacity(const Network &net)
{
    double s = 0.0;
    for (const auto &b : net.buses())
        if (b.kind == BusKind::PQ && b.q_load > 0.0)
            s += b.q_load;
    return s;
}

} // namespace capplan
