#pragma once

// Y-bus assembly and full polar Newton-Raphson AC power flow.
//
// Controllable reactive sources stay PQ buses; their output enters the
// reactive injection specification Q_i = Q_gen + q_ctrl - Q_load.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"

namespace gridflow {

struct Admittance {
    Eigen::MatrixXd g;
    Eigen::MatrixXd b;
    Eigen::MatrixXd y_mag;
    Eigen::MatrixXd y_ang;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(g.rows()); }
};

/// Series admittance 1/(r + jx) of a branch.
inline std::complex<double> series_admittance(const Branch& br) {
    if (br.r == 0.0 && br.x == 0.0) {
        throw PowerFlowError(fmt::format("zero-impedance branch {}-{}", br.from.value, br.to.value));
    }
    return 1.0 / std::complex<double>(br.r, br.x);
}

inline Admittance build_admittance(const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const Branch& br : net.branches) {
        const auto i = static_cast<Eigen::Index>(net.index_of(br.from));
        const auto j = static_cast<Eigen::Index>(net.index_of(br.to));
        const auto ys = series_admittance(br);
        const std::complex<double> half_charging(0.0, br.b_charging / 2.0);
        y(i, i) += ys + half_charging;
        y(j, j) += ys + half_charging;
        y(i, j) -= ys;
        y(j, i) -= ys;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Bus& bus = net.buses[static_cast<std::size_t>(i)];
        y(i, i) += std::complex<double>(bus.g_shunt, bus.b_shunt);
    }
    Admittance out;
    out.g = y.real();
    out.b = y.imag();
    out.y_mag = y.cwiseAbs();
    out.y_ang = y.unaryExpr([](std::complex<double> c) { return std::arg(c); }).real();
    return out;
}

/// Ordering of Newton-Raphson unknowns: angles of every non-slack bus
/// followed by magnitudes of every PQ bus. Mismatch rows use the same order
/// (P rows, then Q rows).
struct Layout {
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> voltage_buses;
    std::vector<int> angle_pos;    // -1 for the slack bus
    std::vector<int> voltage_pos;  // -1 for slack and PV buses

    explicit Layout(const Network& net) : angle_pos(net.buses.size(), -1), voltage_pos(net.buses.size(), -1) {
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            if (net.buses[i].kind != BusKind::Slack) {
                angle_pos[i] = static_cast<int>(angle_buses.size());
                angle_buses.push_back(i);
            }
        }
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            if (net.buses[i].kind == BusKind::PQ) {
                voltage_pos[i] = static_cast<int>(angle_buses.size() + voltage_buses.size());
                voltage_buses.push_back(i);
            }
        }
    }

    [[nodiscard]] std::size_t unknowns() const { return angle_buses.size() + voltage_buses.size(); }
};

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 30;
};

struct PowerFlowSolution {
    Eigen::VectorXd v;
    Eigen::VectorXd delta;
    Eigen::VectorXd p_inj;
    Eigen::VectorXd q_inj;
    bool converged = false;
    int iterations = 0;
    double max_mismatch = std::numeric_limits<double>::infinity();
    std::vector<double> mismatch_history;  // max |mismatch| before each update
};

struct BranchFlow {
    std::size_t branch = 0;  // index into Network::branches
    double p_from = 0.0;
    double p_to = 0.0;
    double loss = 0.0;
};

/// Net injections computed from the state: S_i = V_i conj(sum_j Y_ij V_j).
inline void compute_injections(const Admittance& y, const Eigen::VectorXd& v, const Eigen::VectorXd& delta,
                               Eigen::VectorXd& p, Eigen::VectorXd& q) {
    const auto n = v.size();
    p.setZero(n);
    q.setZero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double pi = 0.0;
        double qi = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double gij = y.g(i, j);
            const double bij = y.b(i, j);
            if (gij == 0.0 && bij == 0.0) continue;
            const double dij = delta(i) - delta(j);
            const double c = std::cos(dij);
            const double s = std::sin(dij);
            pi += v(j) * (gij * c + bij * s);
            qi += v(j) * (gij * s - bij * c);
        }
        p(i) = v(i) * pi;
        q(i) = v(i) * qi;
    }
}

/// Analytic polar Jacobian d(P, Q)/d(delta, V) in `layout` order.
inline Eigen::MatrixXd jacobian(const Layout& layout, const Admittance& y, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& delta) {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
    compute_injections(y, v, delta, p, q);
    const auto m = static_cast<Eigen::Index>(layout.unknowns());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    const auto n = v.size();

    // Rows: P at angle buses, Q at voltage buses. Row index of Q_i equals
    // voltage_pos[i] since both blocks share the [angle | voltage] offsets.
    for (Eigen::Index i = 0; i < n; ++i) {
        const int rp = layout.angle_pos[static_cast<std::size_t>(i)];
        const int rq = layout.voltage_pos[static_cast<std::size_t>(i)];
        if (rp < 0 && rq < 0) continue;
        for (Eigen::Index k = 0; k < n; ++k) {
            const int ca = layout.angle_pos[static_cast<std::size_t>(k)];
            const int cv = layout.voltage_pos[static_cast<std::size_t>(k)];
            if (ca < 0 && cv < 0) continue;
            const double gik = y.g(i, k);
            const double bik = y.b(i, k);
            double dp_dd;
            double dp_dv;
            double dq_dd;
            double dq_dv;
            if (i == k) {
                dp_dd = -q(i) - bik * v(i) * v(i);
                dp_dv = p(i) / v(i) + gik * v(i);
                dq_dd = p(i) - gik * v(i) * v(i);
                dq_dv = q(i) / v(i) - bik * v(i);
            } else {
                if (gik == 0.0 && bik == 0.0) continue;
                const double dik = delta(i) - delta(k);
                const double c = std::cos(dik);
                const double s = std::sin(dik);
                dp_dd = v(i) * v(k) * (gik * s - bik * c);
                dp_dv = v(i) * (gik * c + bik * s);
                dq_dd = -v(i) * v(k) * (gik * c + bik * s);
                dq_dv = v(i) * (gik * s - bik * c);
            }
            if (rp >= 0 && ca >= 0) jac(rp, ca) = dp_dd;
            if (rp >= 0 && cv >= 0) jac(rp, cv) = dp_dv;
            if (rq >= 0 && ca >= 0) jac(rq, ca) = dq_dd;
            if (rq >= 0 && cv >= 0) jac(rq, cv) = dq_dv;
        }
    }
    return jac;
}

/// Specified net injections for the given control vector.
inline void specified_injections(const Network& net, std::span<const double> q_ctrl, Eigen::VectorXd& p_spec,
                                 Eigen::VectorXd& q_spec) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    p_spec.resize(n);
    q_spec.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Bus& b = net.buses[static_cast<std::size_t>(i)];
        p_spec(i) = b.p_gen - b.p_load;
        q_spec(i) = b.q_gen - b.q_load;
    }
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        q_spec(static_cast<Eigen::Index>(net.index_of(net.sources[s].bus))) += q_ctrl[s];
    }
}

/// Solves the AC power flow for control vector `q_ctrl` (one entry per
/// source). Cold starts use V = 1 at PQ buses, setpoints elsewhere, and zero
/// angles. Non-convergence is reported through `converged == false`; a
/// singular Jacobian throws SingularError.
inline PowerFlowSolution solve(const Network& net, const Admittance& y, std::span<const double> q_ctrl,
                               const PowerFlowSolution* warm_start = nullptr, const PowerFlowOptions& opt = {}) {
    if (q_ctrl.size() != net.sources.size()) {
        throw PowerFlowError(fmt::format("control vector has {} entries for {} sources", q_ctrl.size(),
                                         net.sources.size()));
    }
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    const Layout layout(net);

    PowerFlowSolution sol;
    if (warm_start != nullptr) {
        if (warm_start->v.size() != n || warm_start->delta.size() != n) {
            throw PowerFlowError("warm start dimension does not match the network");
        }
        sol.v = warm_start->v;
        sol.delta = warm_start->delta;
    } else {
        sol.v = Eigen::VectorXd::Ones(n);
        sol.delta = Eigen::VectorXd::Zero(n);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Bus& b = net.buses[static_cast<std::size_t>(i)];
        if (b.kind != BusKind::PQ) sol.v(i) = b.v_init;
        if (b.kind == BusKind::Slack) sol.delta(i) = 0.0;
    }

    Eigen::VectorXd p_spec;
    Eigen::VectorXd q_spec;
    specified_injections(net, q_ctrl, p_spec, q_spec);

    const auto m = static_cast<Eigen::Index>(layout.unknowns());
    Eigen::VectorXd mismatch(m);
    for (int iter = 0;; ++iter) {
        compute_injections(y, sol.v, sol.delta, sol.p_inj, sol.q_inj);
        for (std::size_t a = 0; a < layout.angle_buses.size(); ++a) {
            const auto i = static_cast<Eigen::Index>(layout.angle_buses[a]);
            mismatch(static_cast<Eigen::Index>(a)) = p_spec(i) - sol.p_inj(i);
        }
        for (std::size_t r = 0; r < layout.voltage_buses.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(layout.voltage_buses[r]);
            mismatch(static_cast<Eigen::Index>(layout.angle_buses.size() + r)) = q_spec(i) - sol.q_inj(i);
        }
        sol.max_mismatch = m == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
        sol.mismatch_history.push_back(sol.max_mismatch);
        sol.iterations = iter;
        if (!std::isfinite(sol.max_mismatch)) {
            sol.converged = false;
            return sol;
        }
        if (sol.max_mismatch <= opt.tolerance) {
            sol.converged = true;
            return sol;
        }
        if (iter == opt.max_iterations) {
            sol.converged = false;
            return sol;
        }

        const Eigen::MatrixXd jac = jacobian(layout, y, sol.v, sol.delta);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        if (!(lu.rcond() > 1e-14)) throw SingularError("singular power-flow Jacobian");
        const Eigen::VectorXd dx = lu.solve(mismatch);
        for (std::size_t a = 0; a < layout.angle_buses.size(); ++a) {
            sol.delta(static_cast<Eigen::Index>(layout.angle_buses[a])) += dx(static_cast<Eigen::Index>(a));
        }
        for (std::size_t r = 0; r < layout.voltage_buses.size(); ++r) {
            sol.v(static_cast<Eigen::Index>(layout.voltage_buses[r])) +=
                dx(static_cast<Eigen::Index>(layout.angle_buses.size() + r));
        }
    }
}

/// Real power entering each branch at both terminals; loss = p_from + p_to.
inline std::vector<BranchFlow> branch_flows(const Network& net, const PowerFlowSolution& sol) {
    std::vector<BranchFlow> out;
    out.reserve(net.branches.size());
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const auto i = static_cast<Eigen::Index>(net.index_of(br.from));
        const auto j = static_cast<Eigen::Index>(net.index_of(br.to));
        const auto ys = series_admittance(br);
        const std::complex<double> half_charging(0.0, br.b_charging / 2.0);
        const auto vi = std::polar(sol.v(i), sol.delta(i));
        const auto vj = std::polar(sol.v(j), sol.delta(j));
        const auto i_from = ys * (vi - vj) + half_charging * vi;
        const auto i_to = ys * (vj - vi) + half_charging * vj;
        BranchFlow f;
        f.branch = k;
        f.p_from = (vi * std::conj(i_from)).real();
        f.p_to = (vj * std::conj(i_to)).real();
        f.loss = f.p_from + f.p_to;
        out.push_back(f);
    }
    return out;
}

/// Q_i = sum_j V_i V_j (G_ij sin d_ij - B_ij cos d_ij) at bus index `i`.
inline double reactive_injection(std::size_t i, const Admittance& y, const PowerFlowSolution& sol) {
    const auto ii = static_cast<Eigen::Index>(i);
    double q = 0.0;
    for (Eigen::Index j = 0; j < sol.v.size(); ++j) {
        const double dij = sol.delta(ii) - sol.delta(j);
        q += sol.v(ii) * sol.v(j) * (y.g(ii, j) * std::sin(dij) - y.b(ii, j) * std::cos(dij));
    }
    return q;
}

}  // namespace gridflow
