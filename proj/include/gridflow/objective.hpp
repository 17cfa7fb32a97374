#pragma once

// Weighted objective f = W1 P_loss + W2 D_V + W3 C_Q and its gradient with
// respect to each controllable reactive output.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"
#include "gridflow/powerflow.hpp"

namespace gridflow {

enum class GradientMode {
    Exact,        // measured angle differences
    AngleApprox,  // every delta_ij taken as zero
};

inline std::string_view to_string(GradientMode m) { return m == GradientMode::Exact ? "exact" : "approx"; }

/// How the voltage-coupled part of the gradient maps dV onto dQ.
enum class GradientForm {
    Sensitivity,  // full power-flow sensitivity, dx/dQ = J^-1 e_Q
    Local,        // single-bus ratio V_i / (Q_i - V_i^2 B_ii), no cross-bus coupling
};

struct ObjectiveBreakdown {
    double f = 0.0;
    double loss_term = 0.0;
    double dev_term = 0.0;
    double cost_term = 0.0;
    double p_loss = 0.0;
    double d_v = 0.0;
    double c_q = 0.0;
};

struct CostCurve {
    double a_p = 0.0;
    double b_p = 0.0;
    double c_p = 0.0;
    double p_gen = 0.0;
};

struct CostTerm {
    CostCurve curve;
    double q = 0.0;
};

/// sin(sigma) = |Q| / sqrt(P^2 + Q^2); 1 at P = Q = 0.
inline double sin_sigma(double p, double q) {
    const double s = std::hypot(p, q);
    if (s == 0.0) return 1.0;
    return std::abs(q) / s;
}

inline double reactive_cost(const CostCurve& c, double q) {
    const double s = sin_sigma(c.p_gen, q);
    return c.a_p * s * s * q * q + c.b_p * s * q + c.c_p;
}

inline double reactive_cost(std::span<const CostTerm> terms) {
    double total = 0.0;
    for (const auto& t : terms) total += reactive_cost(t.curve, t.q);
    return total;
}

/// d/dQ of the triangle-method cost:
///   2 a Q (sin_s |Q| P^2 / S^3 + sin_s^2) + b (|Q| P^2 / S^3 + sin_s)
inline double reactive_cost_derivative(const CostCurve& c, double q) {
    const double p2 = c.p_gen * c.p_gen;
    const double s = sin_sigma(c.p_gen, q);
    if (p2 == 0.0) return 2.0 * c.a_p * q + c.b_p;
    const double mag = std::hypot(c.p_gen, q);
    const double ratio = std::abs(q) * p2 / (mag * mag * mag);
    return 2.0 * c.a_p * q * (s * ratio + s * s) + c.b_p * (ratio + s);
}

inline std::vector<CostTerm> cost_terms(const Network& net, std::span<const double> q_ctrl) {
    std::vector<CostTerm> out;
    out.reserve(net.sources.size());
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& src = net.sources[s];
        const auto& bus = net.buses[net.index_of(src.bus)];
        out.push_back(CostTerm{CostCurve{src.a_p, src.b_p, src.c_p, bus.p_gen}, q_ctrl[s]});
    }
    return out;
}

/// P_loss = sum_i sum_j V_i V_j Y_ij cos(theta_ij + delta_j - delta_i), over all
/// ordered pairs including i = j.
inline double power_loss(const Admittance& y, const PowerFlowSolution& sol) {
    double total = 0.0;
    const auto n = sol.v.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (y.y_mag(i, j) == 0.0) continue;
            total += sol.v(i) * sol.v(j) * y.y_mag(i, j) * std::cos(y.y_ang(i, j) + sol.delta(j) - sol.delta(i));
        }
    }
    return total;
}

/// Buses counted in the deviation term with their reference magnitudes.
/// Slack and PV buses are excluded because the power flow pins their magnitude.
struct DeviationTargets {
    std::vector<std::size_t> bus;
    std::vector<double> v_ref;

    explicit DeviationTargets(const Network& net) {
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            if (net.buses[i].kind != BusKind::PQ) continue;
            bus.push_back(i);
            v_ref.push_back(deviation_reference(net, i));
        }
    }
};

inline double voltage_deviation(const Eigen::VectorXd& v, const DeviationTargets& targets) {
    double total = 0.0;
    for (std::size_t k = 0; k < targets.bus.size(); ++k) {
        const double d = v(static_cast<Eigen::Index>(targets.bus[k])) - targets.v_ref[k];
        total += d * d;
    }
    return total;
}

inline double voltage_deviation(const PowerFlowSolution& sol, const DeviationTargets& targets) {
    return voltage_deviation(sol.v, targets);
}

inline ObjectiveBreakdown combine(const Weights& w, double p_loss, double d_v, double c_q) {
    ObjectiveBreakdown out;
    out.p_loss = p_loss;
    out.d_v = d_v;
    out.c_q = c_q;
    out.loss_term = w.loss * p_loss;
    out.dev_term = w.dev * d_v;
    out.cost_term = w.cost * c_q;
    out.f = out.loss_term + out.dev_term + out.cost_term;
    return out;
}

inline ObjectiveBreakdown combined(const Network& net, const Admittance& y, const PowerFlowSolution& sol,
                                   std::span<const double> q_ctrl) {
    const auto terms = cost_terms(net, q_ctrl);
    return combine(net.weights, power_loss(y, sol), voltage_deviation(sol, DeviationTargets(net)),
                   reactive_cost(terms));
}

namespace detail {

/// Partial derivatives of W1 P_loss + W2 D_V with respect to the bus state,
/// evaluated at angles `delta` (zero vector in approximate mode).
inline void state_partials(const Network& net, const Admittance& y, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& delta, Eigen::VectorXd& d_dv, Eigen::VectorXd& d_dd) {
    const auto n = v.size();
    const Weights& w = net.weights;
    d_dv.setZero(n);
    d_dd.setZero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double sv = 0.0;
        double sd = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (y.y_mag(k, j) == 0.0 && y.y_mag(j, k) == 0.0) continue;
            const double a_kj = y.y_ang(k, j) + delta(j) - delta(k);
            const double a_jk = y.y_ang(j, k) + delta(k) - delta(j);
            sv += v(j) * (y.y_mag(k, j) * std::cos(a_kj) + y.y_mag(j, k) * std::cos(a_jk));
            if (j != k) sd += v(k) * v(j) * (y.y_mag(k, j) * std::sin(a_kj) - y.y_mag(j, k) * std::sin(a_jk));
        }
        d_dv(k) = w.loss * sv;
        d_dd(k) = w.loss * sd;
    }
    const DeviationTargets targets(net);
    for (std::size_t t = 0; t < targets.bus.size(); ++t) {
        const auto k = static_cast<Eigen::Index>(targets.bus[t]);
        d_dv(k) += w.dev * 2.0 * (v(k) - targets.v_ref[t]);
    }
}

inline std::string source_bus_list(const Network& net) {
    std::string out;
    for (const auto& s : net.sources) out += (out.empty() ? "" : ",") + std::to_string(s.bus.value);
    return out;
}

}  // namespace detail

/// df/dQ for every source at the solved state.
///
/// The loss and deviation terms are differentiated with respect to the bus
/// state x = (delta, V) and carried onto Q through the power-flow
/// sensitivity dx/dQ_i = J^-1 e_Qi, solved once as J^T lambda = df/dx. In
/// AngleApprox mode every cos(delta_ij) is 1 and every sin(delta_ij) is 0, both
/// in df/dx (where Y_ij cos(theta_ij + delta_ji) collapses to G_ij) and in J.
inline std::vector<double> gradients(const Network& net, const Admittance& y, const PowerFlowSolution& sol,
                                     std::span<const double> q_ctrl, GradientMode mode) {
    const auto n = sol.v.size();
    const Eigen::VectorXd delta = mode == GradientMode::Exact ? sol.delta : Eigen::VectorXd::Zero(n);
    Eigen::VectorXd d_dv;
    Eigen::VectorXd d_dd;
    detail::state_partials(net, y, sol.v, delta, d_dv, d_dd);

    const Layout layout(net);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(layout.unknowns()));
    for (std::size_t a = 0; a < layout.angle_buses.size(); ++a) {
        rhs(static_cast<Eigen::Index>(a)) = d_dd(static_cast<Eigen::Index>(layout.angle_buses[a]));
    }
    for (std::size_t r = 0; r < layout.voltage_buses.size(); ++r) {
        rhs(static_cast<Eigen::Index>(layout.angle_buses.size() + r)) =
            d_dv(static_cast<Eigen::Index>(layout.voltage_buses[r]));
    }
    const Eigen::MatrixXd jac = jacobian(layout, y, sol.v, delta);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.transpose());
    if (!(lu.rcond() > 1e-14)) {
        throw SingularError(fmt::format("singular voltage sensitivity at source buses {}",
                                        detail::source_bus_list(net)));
    }
    const Eigen::VectorXd lambda = lu.solve(rhs);

    const auto terms = cost_terms(net, q_ctrl);
    std::vector<double> out(net.sources.size());
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const int row = layout.voltage_pos[net.index_of(net.sources[s].bus)];
        out[s] = lambda(row) + net.weights.cost * reactive_cost_derivative(terms[s].curve, terms[s].q);
    }
    return out;
}

/// Single-bus gradient without cross-bus coupling:
///
///   2 [W1 V_i sum_j V_j Y_ij cos(theta_ij + delta_ji) + W2 (V_i - V_i*)]
///   ------------------------------------------------------------------  + W3 dC_Q/dQ_i
///                    Q_Gi - Q_Di - V_i^2 B_ii
///
/// with Y_ij cos(theta_ij + delta_ji) replaced by G_ij in AngleApprox mode.
/// Cheap and fully local, but it neglects how Q_i moves the other buses.
inline double local_gradient(std::size_t source, const Network& net, const Admittance& y,
                             const PowerFlowSolution& sol, std::span<const double> q_ctrl, GradientMode mode) {
    const auto& src = net.sources[source];
    const std::size_t bus = net.index_of(src.bus);
    const auto i = static_cast<Eigen::Index>(bus);
    const Weights& w = net.weights;

    double row = 0.0;
    for (Eigen::Index j = 0; j < sol.v.size(); ++j) {
        if (mode == GradientMode::Exact) {
            row += sol.v(j) * y.y_mag(i, j) * std::cos(y.y_ang(i, j) + sol.delta(j) - sol.delta(i));
        } else {
            row += sol.v(j) * y.g(i, j);
        }
    }
    const double vi = sol.v(i);
    const double numerator = 2.0 * (w.loss * vi * row + w.dev * (vi - deviation_reference(net, bus)));
    const double q_gen = net.buses[bus].q_gen + q_ctrl[source];
    const double denominator = q_gen - net.buses[bus].q_load - vi * vi * y.b(i, i);
    if (std::abs(denominator) < 1e-9) {
        throw SingularError(fmt::format("singular voltage sensitivity at bus {}", src.bus.value));
    }
    const CostCurve curve{src.a_p, src.b_p, src.c_p, net.buses[bus].p_gen};
    return numerator / denominator + w.cost * reactive_cost_derivative(curve, q_ctrl[source]);
}

inline std::vector<double> gradients(const Network& net, const Admittance& y, const PowerFlowSolution& sol,
                                     std::span<const double> q_ctrl, GradientMode mode, GradientForm form) {
    if (form == GradientForm::Sensitivity) return gradients(net, y, sol, q_ctrl, mode);
    std::vector<double> out(net.sources.size());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = local_gradient(s, net, y, sol, q_ctrl, mode);
    return out;
}

inline double gradient(std::size_t source, const Network& net, const Admittance& y, const PowerFlowSolution& sol,
                       std::span<const double> q_ctrl, GradientMode mode) {
    return gradients(net, y, sol, q_ctrl, mode).at(source);
}

/// Two-point difference of `f` along coordinate `i`; falls back to a
/// one-sided difference when q_i +/- h would leave [lo, hi].
template <class Objective>
double central_difference(Objective&& f, std::span<const double> q, std::size_t i, double h, double lo, double hi) {
    std::vector<double> plus(q.begin(), q.end());
    std::vector<double> minus(q.begin(), q.end());
    const bool up = q[i] + h <= hi;
    const bool down = q[i] - h >= lo;
    if (up) plus[i] += h;
    if (down) minus[i] -= h;
    const double span = (up ? h : 0.0) + (down ? h : 0.0);
    if (span == 0.0) throw Error("finite-difference step does not fit in the control interval");
    return (f(std::span<const double>(plus)) - f(std::span<const double>(minus))) / span;
}

struct Evaluation {
    PowerFlowSolution pf;
    ObjectiveBreakdown objective;
};

/// Power flow plus objective at `q_ctrl`; throws DivergenceError when the
/// power flow does not converge.
inline Evaluation evaluate(const Network& net, const Admittance& y, std::span<const double> q_ctrl,
                           const PowerFlowSolution* warm_start = nullptr, const PowerFlowOptions& opt = {}) {
    Evaluation e;
    e.pf = solve(net, y, q_ctrl, warm_start, opt);
    if (!e.pf.converged) {
        throw DivergenceError(fmt::format("power flow did not converge ({} iterations, max mismatch {:.3e})",
                                          e.pf.iterations, e.pf.max_mismatch));
    }
    e.objective = combined(net, y, e.pf, q_ctrl);
    return e;
}

/// Finite-difference df/dQ_i through full power-flow re-solves.
inline double fd_gradient(std::size_t source, const Network& net, const Admittance& y, std::span<const double> q_ctrl,
                          double h, const PowerFlowOptions& opt = {}) {
    auto f = [&](std::span<const double> q) { return evaluate(net, y, q, nullptr, opt).objective.f; };
    const auto& src = net.sources.at(source);
    return central_difference(f, q_ctrl, source, h, src.q_min, src.q_max);
}

}  // namespace gridflow
