#pragma once

// CSV, aligned-text and SVG renderings of traces and reports. Numbers use a
// fixed `%.10g` style so output is byte-stable for identical inputs.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gridflow/analyzer.hpp"
#include "gridflow/controller.hpp"
#include "gridflow/error.hpp"
#include "gridflow/pso.hpp"

namespace gridflow {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    return fmt::format("{:.10g}", v);
}

inline double to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Writes via a temporary sibling and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(fmt::format("short write to '{}'", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

inline std::string trace_csv(const SimulationTrace& trace) {
    std::string out = "iter,event,f,loss_term,dev_term,cost_term";
    for (const auto& s : trace.source_labels) out += ",Q" + s;
    for (const auto& b : trace.bus_labels) out += ",V" + b;
    out += ",grad_max\n";
    for (const auto& r : trace.records) {
        out += fmt::format("{},{},{},{},{},{}", r.k, r.event, num(r.objective.f), num(r.objective.loss_term),
                           num(r.objective.dev_term), num(r.objective.cost_term));
        for (double q : r.q) out += "," + num(q);
        for (double v : r.v) out += "," + num(v);
        out += "," + num(r.grad_max) + "\n";
    }
    return out;
}

namespace detail {

inline std::string iterations_text(const std::optional<int>& it) { return it ? std::to_string(*it) : "-"; }

}  // namespace detail

/// One row per run plus a delta row (second run minus first).
inline std::string comparison_csv(const ComparisonReport& r, bool with_timing = true) {
    std::string out = "run,objective_function,cost,power_loss,voltage_deviation";
    for (const auto& s : r.source_labels) out += ",Q_" + s;
    out += ",sum_Q,iterations,wall_time_s\n";
    auto row = [&](const RunSummary& run) {
        out += fmt::format("{},{},{},{},{}", run.label, num(run.objective.f), num(run.objective.cost_term),
                           num(run.objective.loss_term), num(run.objective.dev_term));
        for (double q : run.q) out += "," + num(q);
        out += fmt::format(",{},{},{}\n", num(run.total_q), detail::iterations_text(run.iterations),
                           with_timing ? num(run.wall_seconds) : "-");
    };
    row(r.a);
    row(r.b);
    out += fmt::format("delta,{},{},{},{}", num(r.delta.f), num(r.b.objective.cost_term - r.a.objective.cost_term),
                       num(r.b.objective.loss_term - r.a.objective.loss_term),
                       num(r.b.objective.dev_term - r.a.objective.dev_term));
    for (double q : r.delta.q) out += "," + num(q);
    out += fmt::format(",{},{},{}\n", num(r.delta.total_q), detail::iterations_text(r.delta.iterations),
                       with_timing ? num(r.b.wall_seconds - r.a.wall_seconds) : "-");
    return out;
}

inline std::string comparison_text(const ComparisonReport& r, std::string_view case_name, bool with_timing = true) {
    std::string out;
    out += "Summary of individual cost functions\n";
    out += fmt::format("{:<34} {:>18} {:>12} {:>12} {:>18}\n", "Bus system", "Objective Function", "Cost",
                       "Power Loss", "Voltage Deviation");
    for (const RunSummary* run : {&r.a, &r.b}) {
        out += fmt::format("{:<34} {:>18.6f} {:>12.6f} {:>12.6f} {:>18.6f}\n",
                           fmt::format("{}-{}", case_name, run->label), run->objective.f, run->objective.cost_term,
                           run->objective.loss_term, run->objective.dev_term);
    }
    out += "\nReactive power generation\n";
    out += fmt::format("{:<12} {:>24} {:>24} {:>12}\n", "Serial No.", r.a.label, r.b.label, "Difference");
    for (std::size_t s = 0; s < r.source_labels.size(); ++s) {
        out += fmt::format("{:<12} {:>24.6f} {:>24.6f} {:>12.6f}\n", "Q_" + r.source_labels[s], r.a.q[s], r.b.q[s],
                           r.delta.q[s]);
    }
    out += fmt::format("{:<12} {:>24.6f} {:>24.6f} {:>12.6f}\n", "Sum Q_i", r.a.total_q, r.b.total_q, r.delta.total_q);
    out += "\nConvergence\n";
    out += fmt::format("{:<24} {:>12} {:>14}\n", "Run", "Iterations", "Wall time (s)");
    for (const RunSummary* run : {&r.a, &r.b}) {
        out += fmt::format("{:<24} {:>12} {:>14}\n", run->label, detail::iterations_text(run->iterations),
                           with_timing ? fmt::format("{:.4f}", run->wall_seconds) : "-");
    }
    return out;
}

inline std::string lines_csv(std::span<const LineDiagnostics> lines) {
    std::string out =
        "from,to,delta_i_deg,delta_j_deg,delta_ij_deg,cos_dij,line_flow,sending_flow,loss,loss_pct,approx_ok\n";
    for (const auto& d : lines) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", d.from.value, d.to.value, num(to_degrees(d.delta_i)),
                           num(to_degrees(d.delta_j)), num(to_degrees(d.delta_ij)), num(d.cos_dij), num(d.flow),
                           num(d.sending_flow), num(d.loss), d.loss_pct ? num(*d.loss_pct) : "na",
                           d.approx_ok ? "yes" : "no");
    }
    return out;
}

inline std::string verdict_summary(std::span<const LineDiagnostics> lines, double threshold_pct) {
    return fmt::format("{} of {} lines exceed {} %", count_exceeding(lines), lines.size(), num(threshold_pct));
}

inline std::string lines_text(std::span<const LineDiagnostics> lines, double threshold_pct) {
    std::string out;
    out += "Angle difference between all lines\n";
    out += fmt::format("{:>9} {:>12} {:>7} {:>12} {:>12} {:>10}\n", "Line From", "delta_i(deg)", "Line To",
                       "delta_j(deg)", "delta_ij(deg)", "cos(d_ij)");
    for (const auto& d : lines) {
        out += fmt::format("{:>9} {:>12.4f} {:>7} {:>12.4f} {:>12.4f} {:>10.5f}\n", d.from.value, to_degrees(d.delta_i),
                           d.to.value, to_degrees(d.delta_j), to_degrees(d.delta_ij), d.cos_dij);
    }
    out += "\nPower loss as % of the line flow\n";
    out += fmt::format("{:>10} {:>9} {:>12} {:>22} {:>10}\n", "Line flow", "From-To", "Loss on line",
                       "%Loss of the line flow", "Approx ok");
    for (const auto& d : lines) {
        out += fmt::format("{:>10.5f} {:>9} {:>12.6f} {:>22} {:>10}\n", d.flow,
                           fmt::format("{}-{}", d.from.value, d.to.value), d.loss,
                           d.loss_pct ? fmt::format("{:.4f}", *d.loss_pct) : "n/a", d.approx_ok ? "yes" : "no");
    }
    out += "\n" + verdict_summary(lines, threshold_pct) + "\n";
    return out;
}

inline std::string pso_trace_csv(const PsoResult& r) {
    std::string out = "iter,gbest\n";
    for (std::size_t i = 0; i < r.gbest_history.size(); ++i) out += fmt::format("{},{}\n", i, num(r.gbest_history[i]));
    return out;
}

inline std::string pso_summary_text(std::string_view case_name, const RunSummary& distributed, const PsoResult& pso) {
    std::string out = "Comparison of distributed algorithm with particle swarm\n";
    out += fmt::format("{:<32} {:>20} {:>12} {:>20} {:>12}\n", "Bus system", "Distributed f", "Iterations",
                       "Particle swarm f", "Iterations");
    out += fmt::format("{:<32} {:>20.6f} {:>12} {:>20.6f} {:>12}\n", fmt::format("{}-{}", case_name, distributed.label),
                       distributed.objective.f, detail::iterations_text(distributed.iterations), pso.objective.f,
                       pso.iterations);
    return out;
}

inline std::string settling_csv(const SettlingReport& r) {
    std::string out = "event,start,iterations,segment_length,settled\n";
    for (const auto& e : r.events) {
        out += fmt::format("{},{},{},{},{}\n", e.event, e.start, e.iterations, e.length, e.settled ? "yes" : "no");
    }
    return out;
}

struct PlotSeries {
    std::string name;
    std::vector<double> y;
};

/// Minimal line chart: shared x = 0..n-1, one polyline per series.
inline std::string svg_line_plot(std::string_view title, std::string_view y_label, const std::vector<PlotSeries>& series) {
    constexpr double width = 640.0;
    constexpr double height = 400.0;
    constexpr double left = 70.0;
    constexpr double right = 150.0;
    constexpr double top = 40.0;
    constexpr double bottom = 50.0;
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::size_t n = 0;
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        n = std::max(n, s.y.size());
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (!std::isfinite(ymin)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double xspan = n > 1 ? static_cast<double>(n - 1) : 1.0;
    auto px = [&](std::size_t i) { return left + (width - left - right) * static_cast<double>(i) / xspan; };
    auto py = [&](double v) { return top + (height - top - bottom) * (ymax - v) / (ymax - ymin); };

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n",
        width, height);
    out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
    out += fmt::format("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", width / 2, title);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top,
                       height - bottom);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, height - bottom,
                       width - right);
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 5, top + 4, num(ymax));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 5, height - bottom + 4,
                       num(ymin));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">iteration (0-{})</text>\n",
                       (left + width - right) / 2, height - 15, n > 0 ? n - 1 : 0);
    out += fmt::format("<text x=\"15\" y=\"{0}\" transform=\"rotate(-90 15 {0})\" text-anchor=\"middle\">{1}</text>\n",
                       (top + height - bottom) / 2, y_label);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % std::size(palette)];
        std::string pts;
        for (std::size_t i = 0; i < series[s].y.size(); ++i) {
            if (!std::isfinite(series[s].y[i])) continue;
            pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(i), py(series[s].y[i]));
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
        const double ly = top + 16.0 * static_cast<double>(s);
        out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                           width - right + 10, ly, width - right + 30, color);
        out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", width - right + 35, ly + 4, series[s].name);
    }
    out += "</svg>\n";
    return out;
}

/// Objective, reactive output and PQ-bus voltage plots for one trace.
inline std::vector<std::pair<std::string, std::string>> trace_plots(const SimulationTrace& trace, const Network& net,
                                                                    std::string_view mode) {
    std::vector<std::pair<std::string, std::string>> out;
    PlotSeries f{"f", {}};
    for (const auto& r : trace.records) f.y.push_back(r.objective.f);
    out.emplace_back(fmt::format("objective_{}.svg", mode),
                     svg_line_plot(fmt::format("Objective function ({})", mode), "f", {f}));

    std::vector<PlotSeries> qs;
    for (std::size_t s = 0; s < trace.source_labels.size(); ++s) {
        PlotSeries p{"Q" + trace.source_labels[s], {}};
        for (const auto& r : trace.records) p.y.push_back(r.q[s]);
        qs.push_back(std::move(p));
    }
    out.emplace_back(fmt::format("reactive_{}.svg", mode),
                     svg_line_plot(fmt::format("Reactive power generation ({})", mode), "Q (p.u.)", qs));

    std::vector<PlotSeries> vs;
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        if (net.buses[b].kind != BusKind::PQ) continue;
        PlotSeries p{"V" + trace.bus_labels[b], {}};
        for (const auto& r : trace.records) p.y.push_back(r.v[b]);
        vs.push_back(std::move(p));
    }
    out.emplace_back(fmt::format("voltage_{}.svg", mode),
                     svg_line_plot(fmt::format("Load bus voltages ({})", mode), "V (p.u.)", vs));
    return out;
}

}  // namespace gridflow
