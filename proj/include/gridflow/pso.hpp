#pragma once

// Global-best particle swarm over the reactive control box, used as a
// baseline for the gradient controller. Fitness is the weighted objective
// after a full power-flow solve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"
#include "gridflow/objective.hpp"
#include "gridflow/powerflow.hpp"

namespace gridflow {

struct PsoConfig {
    int n_particles = 30;
    double inertia = 0.7;
    double c1 = 1.5;
    double c2 = 1.5;
    int max_iter = 200;
    std::uint64_t seed = 42;
    double velocity_clamp = 0.2;  // fraction of each coordinate's range
    int stall_iterations = 10;
    double stall_tolerance = 1e-6;
    /// Optional explicit starting positions; remaining particles are random.
    std::vector<std::vector<double>> initial_positions;
    bool zero_initial_velocity = false;
    PowerFlowOptions pf;
};

struct Particle {
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<double> best_position;
    double best_value = std::numeric_limits<double>::infinity();
};

struct PsoResult {
    std::vector<double> q;
    ObjectiveBreakdown objective;
    int iterations = 0;
    std::vector<double> gbest_history;  // gbest after initialization and after each iteration
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double reflect(double x, double lo, double hi) {
    if (x > hi) x = hi - (x - hi);
    if (x < lo) x = lo + (lo - x);
    return std::clamp(x, lo, hi);
}

}  // namespace detail

inline PsoResult optimize(const Network& net, const Admittance& y, const PsoConfig& cfg) {
    if (net.sources.empty()) throw Error("particle swarm needs at least one source");
    if (cfg.n_particles < 1) throw Error("particle swarm needs at least one particle");
    if (cfg.inertia < 0.0 || cfg.c1 < 0.0 || cfg.c2 < 0.0) throw Error("swarm coefficients must be non-negative");

    const std::size_t dim = net.sources.size();
    const auto lo = net.q_lower();
    const auto hi = net.q_upper();
    std::vector<double> vmax(dim);
    for (std::size_t d = 0; d < dim; ++d) vmax[d] = cfg.velocity_clamp * (hi[d] - lo[d]);

    std::mt19937_64 rng(cfg.seed);
    auto fitness = [&](std::span<const double> q) -> std::pair<double, ObjectiveBreakdown> {
        try {
            auto e = evaluate(net, y, q, nullptr, cfg.pf);
            return {e.objective.f, e.objective};
        } catch (const PowerFlowError&) {
            return {std::numeric_limits<double>::infinity(), ObjectiveBreakdown{}};
        }
    };

    std::vector<Particle> swarm(static_cast<std::size_t>(cfg.n_particles));
    PsoResult out;
    double gbest = std::numeric_limits<double>::infinity();
    std::vector<double> gbest_pos;
    ObjectiveBreakdown gbest_obj;

    for (std::size_t p = 0; p < swarm.size(); ++p) {
        auto& part = swarm[p];
        part.position.resize(dim);
        part.velocity.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            part.position[d] = p < cfg.initial_positions.size() ? std::clamp(cfg.initial_positions[p].at(d), lo[d], hi[d])
                                                                : lo[d] + detail::unit(rng) * (hi[d] - lo[d]);
            part.velocity[d] = cfg.zero_initial_velocity ? 0.0 : (2.0 * detail::unit(rng) - 1.0) * vmax[d];
        }
        auto [value, obj] = fitness(part.position);
        part.best_position = part.position;
        part.best_value = value;
        if (value < gbest) {
            gbest = value;
            gbest_pos = part.position;
            gbest_obj = obj;
        }
    }
    if (gbest_pos.empty()) gbest_pos = swarm.front().position;
    out.gbest_history.push_back(gbest);

    int stall = 0;
    int iter = 0;
    while (iter < cfg.max_iter && stall < cfg.stall_iterations) {
        ++iter;
        // Velocities and positions first, then a fitness sweep, then the
        // gbest reduction with ties going to the lowest particle index.
        for (auto& part : swarm) {
            for (std::size_t d = 0; d < dim; ++d) {
                const double r1 = detail::unit(rng);
                const double r2 = detail::unit(rng);
                double v = cfg.inertia * part.velocity[d] + cfg.c1 * r1 * (part.best_position[d] - part.position[d]) +
                           cfg.c2 * r2 * (gbest_pos[d] - part.position[d]);
                v = std::clamp(v, -vmax[d], vmax[d]);
                double x = part.position[d] + v;
                if (x < lo[d] || x > hi[d]) {
                    x = detail::reflect(x, lo[d], hi[d]);
                    v = 0.0;
                }
                part.position[d] = x;
                part.velocity[d] = v;
            }
        }
        const double previous = gbest;
        for (auto& part : swarm) {
            auto [value, obj] = fitness(part.position);
            if (value < part.best_value) {
                part.best_value = value;
                part.best_position = part.position;
            }
            if (value < gbest) {
                gbest = value;
                gbest_pos = part.position;
                gbest_obj = obj;
            }
        }
        out.gbest_history.push_back(gbest);
        const bool finite = std::isfinite(previous) && std::isfinite(gbest);
        if (finite && previous - gbest < cfg.stall_tolerance) ++stall;
        else stall = 0;
    }

    if (!std::isfinite(gbest)) throw DivergenceError("no particle produced a converged power flow");
    out.q = gbest_pos;
    out.objective = gbest_obj;
    out.iterations = iter;
    return out;
}

}  // namespace gridflow
