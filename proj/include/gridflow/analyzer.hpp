#pragma once

// Post-processing: per-line angle/loss diagnostics with the line-loss
// validity rule for the zero-angle approximation, side-by-side comparison of
// two controller runs, and voltage settling after load events.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridflow/controller.hpp"
#include "gridflow/netmodel.hpp"
#include "gridflow/objective.hpp"
#include "gridflow/powerflow.hpp"

namespace gridflow {

inline constexpr double kDefaultLossThresholdPct = 8.0;

struct LineDiagnostics {
    std::size_t branch = 0;
    BusId from;
    BusId to;
    double delta_i = 0.0;  // radians
    double delta_j = 0.0;
    double delta_ij = 0.0;
    double cos_dij = 1.0;
    double flow = 0.0;          // real power entering at the from end
    double sending_flow = 0.0;  // real power entering at the sending end (>= 0)
    double loss = 0.0;
    std::optional<double> loss_pct;  // empty for zero-flow lines
    bool approx_ok = true;
};

/// Loss percentage is 100 * loss / sending-end flow; a line is safe for the
/// zero-angle approximation when that percentage is at most the threshold.
inline std::vector<LineDiagnostics> line_diagnostics(const Network& net, const PowerFlowSolution& sol,
                                                     double threshold_pct = kDefaultLossThresholdPct) {
    const auto flows = branch_flows(net, sol);
    std::vector<LineDiagnostics> out;
    out.reserve(flows.size());
    for (const auto& f : flows) {
        const Branch& br = net.branches[f.branch];
        const auto i = static_cast<Eigen::Index>(net.index_of(br.from));
        const auto j = static_cast<Eigen::Index>(net.index_of(br.to));
        LineDiagnostics d;
        d.branch = f.branch;
        d.from = br.from;
        d.to = br.to;
        d.delta_i = sol.delta(i);
        d.delta_j = sol.delta(j);
        d.delta_ij = d.delta_i - d.delta_j;
        d.cos_dij = std::cos(d.delta_ij);
        d.flow = f.p_from;
        d.sending_flow = std::max(f.p_from, f.p_to);
        d.loss = f.loss;
        if (d.sending_flow > 1e-12) {
            d.loss_pct = std::max(0.0, 100.0 * f.loss / d.sending_flow);
            d.approx_ok = *d.loss_pct <= threshold_pct;
        }
        out.push_back(d);
    }
    return out;
}

inline std::size_t count_exceeding(std::span<const LineDiagnostics> lines) {
    return static_cast<std::size_t>(std::count_if(lines.begin(), lines.end(), [](const auto& d) { return !d.approx_ok; }));
}

struct RunSummary {
    std::string label;
    GradientMode mode = GradientMode::Exact;
    ObjectiveBreakdown objective;
    std::vector<double> q;
    double total_q = 0.0;
    std::optional<int> iterations;  // to tolerance in the first segment
    double wall_seconds = 0.0;
    SimulationTrace trace;
    PowerFlowSolution final_pf;
};

struct ComparisonDelta {
    double f = 0.0;
    double p_loss = 0.0;
    double d_v = 0.0;
    double c_q = 0.0;
    std::vector<double> q;
    double total_q = 0.0;
    std::optional<int> iterations;
};

struct ComparisonReport {
    RunSummary a;
    RunSummary b;
    ComparisonDelta delta;  // b - a
    std::vector<std::string> source_labels;
};

/// Runs the controller with `cfg` to completion. With no events a single
/// segment of at most `horizon` updates is run from the flat start.
inline RunSummary summarize_run(const Network& net, std::span<const LoadEvent> events, const ControlSettings& cfg,
                                int horizon, std::string label = {}) {
    RunSummary out;
    out.label = label.empty() ? std::string(to_string(cfg.mode)) : std::move(label);
    out.mode = cfg.mode;
    const auto t0 = std::chrono::steady_clock::now();
    if (events.empty()) {
        const Admittance y = build_admittance(net);
        auto seg = run_segment(initial_state(net, cfg), net, y, cfg, horizon);
        out.trace = std::move(seg.trace);
        out.final_pf = std::move(seg.last_pf);
    } else {
        out.trace = run_scenario(net, events, cfg, horizon);
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.trace.records.empty()) throw DivergenceError("controller produced no records: " + out.trace.failure);
    const auto& last = out.trace.records.back();
    out.objective = last.objective;
    out.q = last.q;
    out.total_q = std::accumulate(out.q.begin(), out.q.end(), 0.0);
    out.iterations = out.trace.segments.front().iterations_to_tolerance();
    if (out.trace.diverged) return out;
    if (!events.empty() || out.final_pf.v.size() == 0) {
        // Re-solve at the final control for diagnostics on the final network.
        Network final_net = net;
        for (const auto& ev : events) final_net = apply_event(final_net, ev);
        out.final_pf = evaluate(final_net, build_admittance(final_net), out.q, nullptr, cfg.pf).pf;
    }
    return out;
}

inline ComparisonReport compare_runs(RunSummary a, RunSummary b) {
    ComparisonReport r;
    r.source_labels = a.trace.source_labels;
    r.delta.f = b.objective.f - a.objective.f;
    r.delta.p_loss = b.objective.p_loss - a.objective.p_loss;
    r.delta.d_v = b.objective.d_v - a.objective.d_v;
    r.delta.c_q = b.objective.c_q - a.objective.c_q;
    r.delta.q.resize(a.q.size());
    for (std::size_t s = 0; s < a.q.size(); ++s) r.delta.q[s] = b.q[s] - a.q[s];
    r.delta.total_q = b.total_q - a.total_q;
    if (a.iterations && b.iterations) r.delta.iterations = *b.iterations - *a.iterations;
    r.a = std::move(a);
    r.b = std::move(b);
    return r;
}

/// AngleApprox run (a) against Exact run (b) on identical inputs.
inline ComparisonReport compare_modes(const Network& net, std::span<const LoadEvent> events, double eps, double dt,
                                      int horizon, const ControlSettings& base = {}) {
    ControlSettings approx = base;
    approx.mode = GradientMode::AngleApprox;
    approx.eps = eps;
    approx.dt = dt;
    ControlSettings exact = approx;
    exact.mode = GradientMode::Exact;
    return compare_runs(summarize_run(net, events, approx, horizon, "with approximation"),
                        summarize_run(net, events, exact, horizon, "without approximation"));
}

struct SettlingEntry {
    int event = 0;
    int start = 0;
    int length = 0;      // records in the segment after the event iteration
    int iterations = 0;  // from event injection until voltages stay in band
    bool settled = true;
};

struct SettlingReport {
    double band = 1e-3;
    std::vector<SettlingEntry> events;
};

/// For each event segment: iterations after the event until every bus
/// voltage stays within `band` of its value at the end of the segment.
inline SettlingReport settling_time(const SimulationTrace& trace, double band = 1e-3) {
    SettlingReport out;
    out.band = band;
    for (const Segment& seg : trace.segments) {
        if (seg.event == 0) continue;
        std::vector<const TraceRecord*> recs;
        for (const auto& r : trace.records) {
            if (r.k >= seg.start && r.k <= seg.end) recs.push_back(&r);
        }
        SettlingEntry e;
        e.event = seg.event;
        e.start = seg.start;
        e.length = recs.empty() ? 0 : static_cast<int>(recs.size()) - 1;
        e.settled = seg.converged_at.has_value();
        if (recs.empty()) {
            out.events.push_back(e);
            continue;
        }
        const auto& final_v = recs.back()->v;
        auto within = [&](const TraceRecord& r) {
            for (std::size_t b = 0; b < final_v.size(); ++b) {
                if (!(std::abs(r.v[b] - final_v[b]) <= band)) return false;
            }
            return true;
        };
        int last_out = -1;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (!within(*recs[i])) last_out = static_cast<int>(i);
        }
        e.iterations = e.settled ? last_out + 1 : e.length;
        out.events.push_back(e);
    }
    return out;
}

}  // namespace gridflow
