#pragma once

// Discrete Lyapunov-descent control loop: Q[k+1] = clamp(Q[k] - df/dQ * dt),
// re-solve the power flow, repeat until the largest free gradient is below
// eps. Load events are applied at fixed sample iterations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gridflow/case_io.hpp"
#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"
#include "gridflow/objective.hpp"
#include "gridflow/powerflow.hpp"

namespace gridflow {

struct ControlSettings {
    GradientMode mode = GradientMode::AngleApprox;
    GradientForm form = GradientForm::Sensitivity;
    double dt = 10.0;
    double eps = 1e-3;
    PowerFlowOptions pf;
};

struct ControlState {
    std::vector<double> q;
    int k = 0;
    GradientMode mode = GradientMode::AngleApprox;
    double dt = 10.0;
};

inline ControlState initial_state(const Network& net, const ControlSettings& cfg) {
    return ControlState{std::vector<double>(net.sources.size(), 0.0), 0, cfg.mode, cfg.dt};
}

enum class LoadType { Real, Reactive };

struct LoadEvent {
    int at_iteration = 0;
    std::vector<BusId> buses;
    LoadType load_type = LoadType::Reactive;
    double multiplier = 1.0;
};

/// A source sitting on a bound whose gradient pushes it further out.
inline bool pinned_outward(double q, double g, const ReactiveSource& src) {
    return (q <= src.q_min && g > 0.0) || (q >= src.q_max && g < 0.0);
}

/// max |df/dQ_i| over sources not pinned at a bound.
inline double convergence_norm(const Network& net, std::span<const double> q, std::span<const double> grad) {
    double worst = 0.0;
    for (std::size_t s = 0; s < grad.size(); ++s) {
        if (pinned_outward(q[s], grad[s], net.sources[s])) continue;
        worst = std::max(worst, std::abs(grad[s]));
    }
    return worst;
}

/// Gradient step followed by clamping to [q_min, q_max]. All sources move
/// against the same gradient vector (synchronous update).
inline ControlState apply_update(const ControlState& state, std::span<const double> grad, const Network& net) {
    ControlState next = state;
    for (std::size_t s = 0; s < next.q.size(); ++s) {
        const auto& src = net.sources[s];
        next.q[s] = std::clamp(state.q[s] - grad[s] * state.dt, src.q_min, src.q_max);
    }
    next.k = state.k + 1;
    return next;
}

inline ControlState step(const ControlState& state, const Network& net, const Admittance& y,
                         const PowerFlowSolution& sol, GradientForm form = GradientForm::Sensitivity) {
    const auto grad = gradients(net, y, sol, state.q, state.mode, form);
    return apply_update(state, grad, net);
}

/// New network with the event's loads scaled; everything else copied.
inline Network apply_event(const Network& net, const LoadEvent& ev) {
    if (!(ev.multiplier > 0.0)) throw Error("load multiplier must be positive");
    Network out = net;
    for (BusId id : ev.buses) {
        auto& bus = out.buses.at(out.index_of(id));
        if (ev.load_type == LoadType::Real) bus.p_load *= ev.multiplier;
        else bus.q_load *= ev.multiplier;
    }
    return out;
}

struct TraceRecord {
    int k = 0;
    int event = 0;  // 1-based id of the most recent event, 0 before any
    std::vector<double> q;
    ObjectiveBreakdown objective;
    std::vector<double> v;
    std::vector<double> grad;
    double grad_max = 0.0;
    std::vector<bool> clamped;
};

struct Segment {
    int start = 0;  // first iteration of the segment
    int end = 0;    // last recorded iteration
    int event = 0;
    std::optional<int> converged_at;

    /// Updates performed before the tolerance was met.
    [[nodiscard]] std::optional<int> iterations_to_tolerance() const {
        if (!converged_at) return std::nullopt;
        return *converged_at - start;
    }
};

struct SimulationTrace {
    std::vector<TraceRecord> records;
    std::vector<Segment> segments;
    std::vector<std::string> bus_labels;
    std::vector<std::string> source_labels;
    bool diverged = false;
    std::string failure;
};

namespace detail {

inline TraceRecord make_record(const Network& net, const ControlState& state, const Evaluation& e,
                               std::vector<double> grad, int event) {
    TraceRecord r;
    r.k = state.k;
    r.event = event;
    r.q = state.q;
    r.objective = e.objective;
    r.v.assign(e.pf.v.data(), e.pf.v.data() + e.pf.v.size());
    r.grad_max = convergence_norm(net, state.q, grad);
    r.clamped.resize(state.q.size());
    for (std::size_t s = 0; s < state.q.size(); ++s) {
        const auto& src = net.sources[s];
        r.clamped[s] = state.q[s] <= src.q_min || state.q[s] >= src.q_max;
    }
    r.grad = std::move(grad);
    return r;
}

inline void label(SimulationTrace& trace, const Network& net) {
    for (const auto& b : net.buses) trace.bus_labels.push_back(std::to_string(b.id.value));
    for (const auto& s : net.sources) trace.source_labels.push_back(std::to_string(s.bus.value));
}

}  // namespace detail

struct SegmentResult {
    ControlState state;
    SimulationTrace trace;
    PowerFlowSolution last_pf;
};

/// Steps until the convergence norm drops below eps or `max_iter` updates
/// have been made. The first record is the incoming state. A power-flow
/// failure stops the run; the trace up to that point is kept and
/// `trace.diverged` is set.
inline SegmentResult run_segment(const ControlState& start, const Network& net, const Admittance& y,
                                 const ControlSettings& cfg, int max_iter,
                                 const PowerFlowSolution* warm_start = nullptr, int event = 0) {
    SegmentResult out;
    detail::label(out.trace, net);
    out.state = start;
    Segment seg{start.k, start.k, event, std::nullopt};
    std::optional<PowerFlowSolution> warm;
    if (warm_start != nullptr) warm = *warm_start;

    for (int it = 0;; ++it) {
        Evaluation e;
        try {
            e = evaluate(net, y, out.state.q, warm ? &*warm : nullptr, cfg.pf);
        } catch (const PowerFlowError& err) {
            out.trace.diverged = true;
            out.trace.failure = err.what();
            break;
        }
        auto grad = gradients(net, y, e.pf, out.state.q, out.state.mode, cfg.form);
        const double norm = convergence_norm(net, out.state.q, grad);
        out.trace.records.push_back(detail::make_record(net, out.state, e, grad, event));
        seg.end = out.state.k;
        out.last_pf = e.pf;
        warm = e.pf;
        if (norm < cfg.eps) {
            seg.converged_at = out.state.k;
            break;
        }
        if (it == max_iter) break;
        out.state = apply_update(out.state, grad, net);
    }
    out.trace.segments.push_back(seg);
    return out;
}

/// Runs the loop over iterations 0..horizon. Events fire at their sample
/// iteration (before that iteration's power flow). Between events the
/// controller steps until tolerance and then holds its output.
inline SimulationTrace run_scenario(const Network& base, std::span<const LoadEvent> events, const ControlSettings& cfg,
                                    int horizon) {
    for (std::size_t e = 1; e < events.size(); ++e) {
        if (events[e].at_iteration < events[e - 1].at_iteration) throw Error("events must be sorted by iteration");
    }
    SimulationTrace trace;
    detail::label(trace, base);
    const Admittance y = build_admittance(base);
    Network net = base;
    ControlState state = initial_state(net, cfg);
    std::optional<PowerFlowSolution> warm;
    std::size_t next_event = 0;
    int active_event = 0;
    bool settled = false;
    trace.segments.push_back(Segment{0, 0, 0, std::nullopt});

    for (int k = 0; k <= horizon; ++k) {
        bool fired = false;
        while (next_event < events.size() && events[next_event].at_iteration <= k) {
            net = apply_event(net, events[next_event]);
            active_event = static_cast<int>(next_event) + 1;
            ++next_event;
            fired = true;
        }
        if (fired && k > 0) {
            trace.segments.push_back(Segment{k, k, active_event, std::nullopt});
            settled = false;
        } else if (fired) {
            trace.segments.back().event = active_event;
        }
        state.k = k;

        Evaluation e;
        try {
            e = evaluate(net, y, state.q, warm ? &*warm : nullptr, cfg.pf);
        } catch (const PowerFlowError& err) {
            trace.diverged = true;
            trace.failure = fmt::format("iteration {}: {}", k, err.what());
            break;
        }
        warm = e.pf;
        auto grad = gradients(net, y, e.pf, state.q, state.mode, cfg.form);
        const double norm = convergence_norm(net, state.q, grad);
        trace.records.push_back(detail::make_record(net, state, e, grad, active_event));
        Segment& seg = trace.segments.back();
        seg.end = k;
        if (!settled && norm < cfg.eps) {
            settled = true;
            seg.converged_at = k;
        }
        if (!settled && k < horizon) state = apply_update(state, trace.records.back().grad, net);
    }
    return trace;
}

inline std::string_view to_string(LoadType t) { return t == LoadType::Real ? "real" : "reactive"; }

/// Event schedule rows: `at_iteration bus_list load_type multiplier`, where
/// bus_list is comma-separated and load_type is `real` or `reactive`.
inline std::vector<LoadEvent> parse_events(std::string_view text) {
    std::vector<LoadEvent> out;
    std::size_t line_no = 0;
    for (std::size_t pos = 0; pos <= text.size();) {
        auto nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        auto hash = raw.find('#');
        auto line = detail::trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        auto tok = detail::split_ws(line);
        if (tok.size() != 4) throw ParseError(fmt::format("event row expects 4 fields, got {}", tok.size()), line_no);
        LoadEvent ev;
        ev.at_iteration = detail::parse_int(tok[0], line_no, "at_iteration");
        if (ev.at_iteration < 0) throw ParseError("at_iteration must be >= 0", line_no);
        std::string_view list = tok[1];
        while (!list.empty()) {
            auto comma = list.find(',');
            auto item = list.substr(0, comma);
            if (!item.empty()) ev.buses.push_back(BusId{detail::parse_int(item, line_no, "bus")});
            if (comma == std::string_view::npos) break;
            list.remove_prefix(comma + 1);
        }
        if (ev.buses.empty()) throw ParseError("event lists no buses", line_no);
        auto type = detail::lower(tok[2]);
        if (type == "real" || type == "p") ev.load_type = LoadType::Real;
        else if (type == "reactive" || type == "q") ev.load_type = LoadType::Reactive;
        else throw ParseError(fmt::format("unknown load type '{}'", tok[2]), line_no);
        ev.multiplier = detail::parse_double(tok[3], line_no, "multiplier");
        if (!(ev.multiplier > 0.0)) throw ParseError("multiplier must be positive", line_no);
        if (!out.empty() && ev.at_iteration < out.back().at_iteration) {
            throw ParseError("events must be sorted by at_iteration", line_no);
        }
        out.push_back(std::move(ev));
    }
    return out;
}

/// Every event bus must exist in `net`.
inline void check_events(const Network& net, std::span<const LoadEvent> events) {
    for (std::size_t e = 0; e < events.size(); ++e) {
        for (BusId id : events[e].buses) {
            if (!net.find(id)) throw ValidationError(fmt::format("event {} references unknown bus {}", e + 1, id.value));
        }
    }
}

}  // namespace gridflow
