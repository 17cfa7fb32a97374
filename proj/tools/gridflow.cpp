// gridflow command-line driver: run, compare, analyze, pso.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gridflow/gridflow.hpp"

namespace fs = std::filesystem;
using namespace gridflow;

namespace {

enum Exit { kOk = 0, kNotConverged = 1, kInput = 2, kDiverged = 3 };

struct Options {
    std::string case_path;
    std::string sources_path;
    std::string events_path;
    std::string mode;
    std::string form = "sensitivity";
    double eps = 1e-3;
    double dt = 10.0;
    int horizon = 125;
    std::string out;
    bool svg = false;
    double threshold_pct = kDefaultLossThresholdPct;
    std::uint64_t seed = 42;
    bool dump_pf = false;
    bool no_timing = false;
    int particles = 30;
    double inertia = 0.7;
    double c1 = 1.5;
    double c2 = 1.5;
    int max_iter = 200;
};

struct Input {
    Network net;
    std::vector<LoadEvent> events;
    std::string case_name;
};

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Input load(const Options& o) {
    Input in;
    const std::string text = read_text_file(o.case_path);
    if (ends_with(o.case_path, ".cdf") || ends_with(o.case_path, ".txt")) {
        auto imp = import_ieee_cdf(text);
        for (const auto& w : imp.warnings) fmt::print(stderr, "warning: {}\n", w);
        in.net = std::move(imp.network);
    } else {
        in.net = parse_case(text);
    }
    if (!o.sources_path.empty()) in.net = apply_source_overlay(std::move(in.net), read_text_file(o.sources_path));
    if (in.net.sources.empty()) throw ValidationError("case defines no reactive sources");
    if (!o.events_path.empty()) {
        in.events = parse_events(read_text_file(o.events_path));
        check_events(in.net, in.events);
    }
    in.case_name = in.net.name.empty() ? fs::path(o.case_path).stem().string() : in.net.name;
    return in;
}

GradientMode parse_mode(const std::string& m) {
    if (m == "exact") return GradientMode::Exact;
    if (m == "approx") return GradientMode::AngleApprox;
    throw ValidationError(fmt::format("unknown mode '{}'", m));
}

ControlSettings settings(const Options& o, GradientMode mode) {
    ControlSettings cfg;
    cfg.mode = mode;
    cfg.form = o.form == "local" ? GradientForm::Local : GradientForm::Sensitivity;
    cfg.dt = o.dt;
    cfg.eps = o.eps;
    return cfg;
}

fs::path out_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("GRIDFLOW_OUT"); env != nullptr && *env != '\0') return env;
    return ".";
}

void check_options(const Options& o) {
    if (!(o.eps > 0.0)) throw ValidationError("--eps must be positive");
    if (!(o.dt > 0.0)) throw ValidationError("--dt must be positive");
    if (o.horizon < 0) throw ValidationError("--horizon must be >= 0");
    if (o.threshold_pct < 0.0) throw ValidationError("--threshold-pct must be >= 0");
}

bool all_converged(const SimulationTrace& t) {
    if (t.diverged) return false;
    for (const auto& s : t.segments) {
        if (!s.converged_at) return false;
    }
    return true;
}

int trace_exit(const SimulationTrace& t) {
    if (t.diverged) {
        fmt::print(stderr, "error: power flow diverged: {}\n", t.failure);
        return kDiverged;
    }
    if (!all_converged(t)) {
        fmt::print(stderr, "warning: not every segment reached tolerance\n");
        return kNotConverged;
    }
    return kOk;
}

void dump_pf(const Network& net, const fs::path& dir) {
    const Admittance y = build_admittance(net);
    std::string ybus = "i,j,g,b\n";
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            const auto r = static_cast<Eigen::Index>(i);
            const auto c = static_cast<Eigen::Index>(j);
            if (y.g(r, c) == 0.0 && y.b(r, c) == 0.0) continue;
            ybus += fmt::format("{},{},{},{}\n", net.buses[i].id.value, net.buses[j].id.value, num(y.g(r, c)),
                                num(y.b(r, c)));
        }
    }
    write_file_atomic(dir / "ybus.csv", ybus);
    std::vector<double> q(net.sources.size(), 0.0);
    auto sol = solve(net, y, q);
    std::string mm = "iteration,max_mismatch\n";
    for (std::size_t k = 0; k < sol.mismatch_history.size(); ++k) mm += fmt::format("{},{}\n", k, num(sol.mismatch_history[k]));
    write_file_atomic(dir / "pf_mismatch.csv", mm);
}

void write_plots(const SimulationTrace& t, const Network& net, std::string_view mode, const fs::path& dir) {
    for (const auto& [name, body] : trace_plots(t, net, mode)) write_file_atomic(dir / name, body);
}

int cmd_run(const Options& o) {
    check_options(o);
    auto in = load(o);
    const auto dir = out_dir(o);
    if (o.dump_pf) dump_pf(in.net, dir);
    std::vector<GradientMode> modes;
    if (o.mode == "both") modes = {GradientMode::AngleApprox, GradientMode::Exact};
    else modes = {parse_mode(o.mode)};
    int code = kOk;
    for (auto mode : modes) {
        auto run = summarize_run(in.net, in.events, settings(o, mode), o.horizon);
        write_file_atomic(dir / fmt::format("trace_{}.csv", to_string(mode)), trace_csv(run.trace));
        if (!in.events.empty()) {
            write_file_atomic(dir / fmt::format("settling_{}.csv", to_string(mode)), settling_csv(settling_time(run.trace)));
        }
        if (o.svg) write_plots(run.trace, in.net, to_string(mode), dir);
        fmt::print("{}: f={} iterations={}\n", to_string(mode), num(run.objective.f),
                   run.iterations ? std::to_string(*run.iterations) : "-");
        code = std::max(code, trace_exit(run.trace));
    }
    return code;
}

int cmd_compare(const Options& o) {
    check_options(o);
    auto in = load(o);
    const auto dir = out_dir(o);
    ComparisonReport r;
    if (o.mode == "both") {
        r = compare_modes(in.net, in.events, o.eps, o.dt, o.horizon, settings(o, GradientMode::Exact));
    } else {
        auto cfg = settings(o, parse_mode(o.mode));
        r = compare_runs(summarize_run(in.net, in.events, cfg, o.horizon, fmt::format("{} (1)", o.mode)),
                         summarize_run(in.net, in.events, cfg, o.horizon, fmt::format("{} (2)", o.mode)));
    }
    const bool timing = !o.no_timing;
    write_file_atomic(dir / "comparison.csv", comparison_csv(r, timing));
    const auto text = comparison_text(r, in.case_name, timing);
    write_file_atomic(dir / "comparison.txt", text);
    if (o.svg) {
        write_plots(r.a.trace, in.net, fmt::format("{}_a", to_string(r.a.mode)), dir);
        write_plots(r.b.trace, in.net, fmt::format("{}_b", to_string(r.b.mode)), dir);
    }
    fmt::print("{}", text);
    return std::max(trace_exit(r.a.trace), trace_exit(r.b.trace));
}

int cmd_analyze(const Options& o) {
    check_options(o);
    auto in = load(o);
    const auto dir = out_dir(o);
    auto run = summarize_run(in.net, in.events, settings(o, parse_mode(o.mode)), o.horizon);
    if (run.trace.diverged) return trace_exit(run.trace);
    Network final_net = in.net;
    for (const auto& ev : in.events) final_net = apply_event(final_net, ev);
    auto lines = line_diagnostics(final_net, run.final_pf, o.threshold_pct);
    write_file_atomic(dir / "lines.csv", lines_csv(lines));
    const auto text = lines_text(lines, o.threshold_pct);
    write_file_atomic(dir / "lines.txt", text);
    fmt::print("{}", text);
    return trace_exit(run.trace);
}

int cmd_pso(const Options& o) {
    check_options(o);
    auto in = load(o);
    const auto dir = out_dir(o);
    auto run = summarize_run(in.net, {}, settings(o, parse_mode(o.mode)), o.horizon);
    PsoConfig cfg;
    cfg.n_particles = o.particles;
    cfg.inertia = o.inertia;
    cfg.c1 = o.c1;
    cfg.c2 = o.c2;
    cfg.max_iter = o.max_iter;
    cfg.seed = o.seed;
    auto pso = optimize(in.net, build_admittance(in.net), cfg);
    write_file_atomic(dir / "pso_trace.csv", pso_trace_csv(pso));
    const auto text = pso_summary_text(in.case_name, run, pso);
    write_file_atomic(dir / "pso_summary.txt", text);
    fmt::print("{}", text);
    return trace_exit(run.trace);
}

void add_common(CLI::App* cmd, Options& o, bool with_events) {
    cmd->add_option("--case", o.case_path, "case file (.case native, .cdf IEEE common data format)")->required();
    cmd->add_option("--sources", o.sources_path, "source overlay for imported cases");
    if (with_events) cmd->add_option("--events", o.events_path, "load-event schedule");
    cmd->add_option("--eps", o.eps, "convergence tolerance on max |df/dQ|");
    cmd->add_option("--dt", o.dt, "controller step size");
    cmd->add_option("--horizon", o.horizon, "last controller iteration");
    cmd->add_option("--gradient-form", o.form, "sensitivity or local")->check(CLI::IsMember({"sensitivity", "local"}));
    cmd->add_option("--out", o.out, "output directory (default $GRIDFLOW_OUT or .)");
    cmd->add_flag("--svg", o.svg, "also write SVG plots");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reactive power dispatch by gradient control"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "run the controller and write trace_<mode>.csv");
    add_common(run, o, true);
    run->add_option("--mode", o.mode, "exact, approx or both")->check(CLI::IsMember({"exact", "approx", "both"}));
    run->add_flag("--dump-pf", o.dump_pf, "write ybus.csv and pf_mismatch.csv");

    auto* compare = app.add_subcommand("compare", "compare both gradient modes");
    add_common(compare, o, true);
    compare->add_option("--mode", o.mode, "both, or one mode compared against itself")
        ->check(CLI::IsMember({"exact", "approx", "both"}));
    compare->add_flag("--no-timing", o.no_timing, "write '-' instead of wall times");

    auto* analyze = app.add_subcommand("analyze", "per-line angle and loss diagnostics");
    add_common(analyze, o, true);
    analyze->add_option("--mode", o.mode, "exact or approx")->check(CLI::IsMember({"exact", "approx"}));
    analyze->add_option("--threshold-pct", o.threshold_pct, "loss threshold in percent of line flow");

    auto* pso = app.add_subcommand("pso", "particle swarm baseline against the controller");
    add_common(pso, o, false);
    pso->add_option("--mode", o.mode, "controller mode for the head-to-head")->check(CLI::IsMember({"exact", "approx"}));
    pso->add_option("--seed", o.seed, "random seed");
    pso->add_option("--particles", o.particles, "swarm size");
    pso->add_option("--inertia", o.inertia, "inertia weight");
    pso->add_option("--c1", o.c1, "cognitive coefficient");
    pso->add_option("--c2", o.c2, "social coefficient");
    pso->add_option("--max-iter", o.max_iter, "iteration cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInput;
    }

    if (o.mode.empty()) o.mode = compare->parsed() ? "both" : "exact";

    try {
        if (run->parsed()) return cmd_run(o);
        if (compare->parsed()) return cmd_compare(o);
        if (analyze->parsed()) return cmd_analyze(o);
        return cmd_pso(o);
    } catch (const ParseError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInput;
    } catch (const ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInput;
    } catch (const PowerFlowError& e) {
        fmt::print(stderr, "error: power flow: {}\n", e.what());
        return kDiverged;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInput;
    }
}
