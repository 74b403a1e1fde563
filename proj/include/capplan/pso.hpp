#pragma once

// Box-bounded global-best particle swarm with velocity clamping and a
// linearly decreasing inertia weight.

#include "capplan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace capplan::pso {

struct Bounds
{
    double lo = 0.0;
    double hi = 1.0;
};

struct PsoParams
{
    std::size_t swarm_size = 30;
    std::size_t max_iterations = 40;
    double c1 = 2.0;
    double c2 = 2.0;
    double w_start = 0.9;
    double w_end = 0.4;
    /// velocity clamp as a fraction of each dimension's range
    double v_max_fraction = 0.2;
    std::uint64_t seed = 42;

    void validate() const
    {
        if (swarm_size < 2)
            throw ValidationError("swarm_size must be at least 2");
        if (max_iterations < 1)
            throw ValidationError("max_iterations must be at least 1");
        if (!(c1 >= 0.0) || !(c2 >= 0.0))
            throw ValidationError("acceleration constants must be non-negative");
        if (!(v_max_fraction > 0.0 && v_max_fraction <= 1.0))
            throw ValidationError("v_max_fraction must be in (0, 1]");
        if (!(w_start >= w_end && w_end >= 0.0))
            throw ValidationError("inertia weights must satisfy w_start >= w_end >= 0");
    }
};

/// 64-bit Mersenne Twister with a fixed double conversion, so draws do not
/// depend on the standard library's distribution implementation.
class Random
{
public:
    explicit Random(std::uint64_t seed) : engine_(seed) {}

    /// uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
};

struct Particle
{
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<double> pbest_position;
    double pbest_fitness = std::numeric_limits<double>::infinity();
};

struct Swarm
{
    std::vector<Particle> particles;
    std::vector<Bounds> bounds;
    std::vector<double> v_max;
    std::vector<double> gbest_position;
    double gbest_fitness = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
};

struct OptimizationResult
{
    std::vector<double> gbest_position;
    double gbest_fitness = std::numeric_limits<double>::infinity();
    /// gbest fitness after each iteration
    std::vector<double> history;
    std::size_t evaluations = 0;
};

/// w(it) = w_start - (w_start - w_end) * it / (max_iterations - 1)
inline double inertia_weight(const PsoParams &params, std::size_t iteration)
{
    if (params.max_iterations <= 1)
        return params.w_start;
    return params.w_start - (params.w_start - params.w_end) * static_cast<double>(iteration) /
                                static_cast<double>(params.max_iterations - 1);
}

/// Random positions and velocities; personal bests start at the initial
/// position with unknown fitness.
inline Swarm initialize(std::span<const Bounds> bounds, const PsoParams &params, Random &rng)
{
    params.validate();
    if (bounds.empty())
        throw ValidationError("PSO needs at least one dimension");
    for (const auto &b : bounds)
        if (!(b.lo < b.hi))
            throw ValidationError("PSO bounds must satisfy lo < hi");

    Swarm swarm;
    swarm.bounds.assign(bounds.begin(), bounds.end());
    for (const auto &b : bounds)
        swarm.v_max.push_back(params.v_max_fraction * (b.hi - b.lo));

    const auto dims = bounds.size();
    swarm.particles.resize(params.swarm_size);
    for (auto &p : swarm.particles) {
        p.position.resize(dims);
        p.velocity.resize(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            p.position[d] = rng.uniform(bounds[d].lo, bounds[d].hi);
            p.velocity[d] = rng.uniform(-swarm.v_max[d], swarm.v_max[d]);
        }
        p.pbest_position = p.position;
    }
    return swarm;
}

namespace detail {

template <class Fitness>
double evaluate(Fitness &fitness, const std::vector<double> &x)
{
    const double f = fitness(std::span<const double>(x));
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

/// Strict-improvement personal/global best update, particles in index order.
inline void update_bests(Swarm &swarm, const std::vector<double> &values)
{
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
        auto &p = swarm.particles[i];
        if (values[i] < p.pbest_fitness) {
            p.pbest_fitness = values[i];
            p.pbest_position = p.position;
        }
        if (values[i] < swarm.gbest_fitness) {
            swarm.gbest_fitness = values[i];
            swarm.gbest_position = p.position;
        }
    }
}

} // namespace detail

/// Score the initial positions and seed the personal and global bests.
template <class Fitness>
void evaluate_initial(Swarm &swarm, Fitness &&fitness)
{
    std::vector<double> values;
    values.reserve(swarm.particles.size());
    for (const auto &p : swarm.particles)
        values.push_back(detail::evaluate(fitness, p.position));
    swarm.evaluations += values.size();
    if (swarm.gbest_position.empty() && !swarm.particles.empty())
        swarm.gbest_position = swarm.particles.front().position;
    detail::update_bests(swarm, values);
}

/// One synchronous swarm update.
///
/// All random draws happen, in particle then dimension order, before any
/// fitness evaluation. Positions leaving the box are clamped to it and the
/// velocity on that dimension is zeroed.
template <class Fitness>
void step(Swarm &swarm, Fitness &&fitness, const PsoParams &params, std::size_t iteration, Random &rng)
{
    if (iteration >= params.max_iterations)
        throw ValidationError("PSO step past max_iterations");
    const double w = inertia_weight(params, iteration);
    const auto &g = swarm.gbest_position;

    for (auto &p : swarm.particles) {
        for (std::size_t d = 0; d < p.position.size(); ++d) {
            const double r1 = rng.uniform();
            const double r2 = rng.uniform();
            double v = w * p.velocity[d] + params.c1 * r1 * (p.pbest_position[d] - p.position[d]) +
                       params.c2 * r2 * (g[d] - p.position[d]);
            v = std::clamp(v, -swarm.v_max[d], swarm.v_max[d]);
            double x = p.position[d] + v;
            if (x < swarm.bounds[d].lo || x > swarm.bounds[d].hi) {
                x = std::clamp(x, swarm.bounds[d].lo, swarm.bounds[d].hi);
                v = 0.0;
            }
            p.velocity[d] = v;
            p.position[d] = x;
        }
    }

    std::vector<double> values;
    values.reserve(swarm.particles.size());
    for (const auto &p : swarm.particles)
        values.push_back(detail::evaluate(fitness, p.position));
    swarm.evaluations += values.size();
    detail::update_bests(swarm, values);
}

/// Minimise `fitness` over the box. Deterministic for a given seed.
template <class Fitness>
OptimizationResult optimize(Fitness &&fitness, std::span<const Bounds> bounds, const PsoParams &params)
{
    Random rng(params.seed);
    Swarm swarm = initialize(bounds, params, rng);
    evaluate_initial(swarm, fitness);

    OptimizationResult result;
    result.history.reserve(params.max_iterations);
    for (std::size_t it = 0; it < params.max_iterations; ++it) {
        step(swarm, fitness, params, it, rng);
        result.history.push_back(swarm.gbest_fitness);
    }
    result.gbest_position = swarm.gbest_position;
    result.gbest_fitness = swarm.gbest_fitness;
    result.evaluations = swarm.evaluations;
    return result;
}

} // namespace capplan::pso
