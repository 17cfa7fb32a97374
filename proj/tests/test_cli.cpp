#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

namespace fs = std::filesystem;
using namespace gridflow::testing;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::StartsWith;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("gridflow_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Result cli(const std::string& args, const fs::path& dir, const std::string& env = {}) {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" GRIDFLOW_CLI "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

std::string case9() { return "--case '" + data_path("ieee9.case").string() + "'"; }
std::string events4() { return "--events '" + data_path("table4.events").string() + "'"; }

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("run writes the trace with a stable header") {
    auto dir = scratch("run");
    auto r = cli("run " + case9() + " " + events4() + " --mode approx --out '" + dir.string() + "'", dir);
    CHECK(r.code == 0);
    const auto trace = slurp(dir / "trace_approx.csv");
    CHECK(first_line(trace) ==
          "iter,event,f,loss_term,dev_term,cost_term,Q5,Q6,Q7,Q8,Q9,V1,V2,V3,V4,V5,V6,V7,V8,V9,grad_max");
    CHECK(line_count(trace) == 127);
    CHECK_THAT(trace, ContainsSubstring("\n25,1,"));
    CHECK_THAT(trace, ContainsSubstring("\n50,2,"));
    CHECK_THAT(trace, ContainsSubstring("\n75,3,"));
    CHECK_THAT(trace, ContainsSubstring("\n100,4,"));
    CHECK(first_line(slurp(dir / "settling_approx.csv")) == "event,start,iterations,segment_length,settled");
}

TEST_CASE("horizon zero leaves only the initial state") {
    auto dir = scratch("h0");
    auto r = cli("run " + case9() + " --mode exact --horizon 0 --out '" + dir.string() + "'", dir);
    CHECK(r.code == 1);
    const auto trace = slurp(dir / "trace_exact.csv");
    CHECK(line_count(trace) == 2);
    CHECK_THAT(trace, ContainsSubstring("\n0,0,"));
}

TEST_CASE("missing case exits 2 and names the path") {
    auto dir = scratch("missing");
    auto r = cli("run --case missing.case --out '" + dir.string() + "'", dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("missing.case"));
}

TEST_CASE("malformed input exits 2") {
    auto dir = scratch("bad");
    std::ofstream(dir / "bad.case") << "[bus]\n1 slack 1 0 0 0 0 0\n";
    auto r = cli("run --case '" + (dir / "bad.case").string() + "' --out '" + dir.string() + "'", dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("line 2"));

    std::ofstream(dir / "bad.events") << "10 42 real 1.1\n";
    r = cli("run " + case9() + " --events '" + (dir / "bad.events").string() + "' --out '" + dir.string() + "'", dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("unknown bus 42"));

    r = cli("run " + case9() + " --mode sideways", dir);
    CHECK(r.code == 2);
    r = cli("run " + case9() + " --dt -1", dir);
    CHECK(r.code == 2);
}

TEST_CASE("power-flow divergence exits 3") {
    auto dir = scratch("diverge");
    std::ofstream(dir / "heavy.events") << "2 5,6,8,9 real 20\n";
    auto r = cli("run " + case9() + " --events '" + (dir / "heavy.events").string() + "' --out '" + dir.string() + "'",
                 dir);
    CHECK(r.code == 3);
    CHECK_THAT(r.err, ContainsSubstring("diverged"));
}

TEST_CASE("compare writes both tables") {
    auto dir = scratch("compare");
    auto r = cli("compare " + case9() + " --no-timing --out '" + dir.string() + "'", dir);
    CHECK(r.code == 0);
    const auto csv = slurp(dir / "comparison.csv");
    CHECK(first_line(csv) ==
          "run,objective_function,cost,power_loss,voltage_deviation,Q_5,Q_6,Q_7,Q_8,Q_9,sum_Q,iterations,wall_time_s");
    CHECK_THAT(csv, ContainsSubstring("\nwith approximation,"));
    CHECK_THAT(csv, ContainsSubstring("\nwithout approximation,"));
    CHECK_THAT(csv, ContainsSubstring("\ndelta,"));
    const auto txt = slurp(dir / "comparison.txt");
    CHECK_THAT(txt, StartsWith("Summary of individual cost functions"));
    CHECK_THAT(txt, ContainsSubstring("ieee9-with approximation"));
    CHECK_THAT(txt, ContainsSubstring("Sum Q_i"));
}

TEST_CASE("self comparison has zero deltas") {
    auto dir = scratch("self");
    auto r = cli("compare " + case9() + " --mode exact --no-timing --out '" + dir.string() + "'", dir);
    CHECK(r.code == 0);
    const auto csv = slurp(dir / "comparison.csv");
    CHECK_THAT(csv, ContainsSubstring("\ndelta,0,0,0,0,0,0,0,0,0,0,0,-\n"));
}

TEST_CASE("analyze writes line diagnostics") {
    auto dir = scratch("analyze");
    auto r = cli("analyze " + case9() + " --out '" + dir.string() + "'", dir);
    CHECK(r.code == 0);
    const auto csv = slurp(dir / "lines.csv");
    CHECK(first_line(csv) ==
          "from,to,delta_i_deg,delta_j_deg,delta_ij_deg,cos_dij,line_flow,sending_flow,loss,loss_pct,approx_ok");
    CHECK(line_count(csv) == 10);
    CHECK_THAT(r.out, ContainsSubstring("lines exceed 8 %"));

    r = cli("analyze " + case9() + " --threshold-pct 0 --out '" + dir.string() + "'", dir);
    CHECK_THAT(r.out, ContainsSubstring("9 of 9 lines exceed 0 %"));
}

TEST_CASE("pso writes its trace and summary") {
    auto dir = scratch("pso");
    auto r = cli("pso " + case9() + " --seed 42 --out '" + dir.string() + "'", dir);
    CHECK(r.code == 0);
    CHECK(first_line(slurp(dir / "pso_trace.csv")) == "iter,gbest");
    CHECK_THAT(slurp(dir / "pso_summary.txt"), ContainsSubstring("Particle swarm f"));
}

TEST_CASE("outputs are byte-identical across runs") {
    auto a = scratch("det_a");
    auto b = scratch("det_b");
    for (const auto& dir : {a, b}) {
        const auto o = " --out '" + dir.string() + "'";
        REQUIRE(cli("run " + case9() + " " + events4() + " --mode both --svg" + o, dir).code == 0);
        REQUIRE(cli("compare " + case9() + " --no-timing" + o, dir).code == 0);
        REQUIRE(cli("analyze " + case9() + o, dir).code == 0);
        REQUIRE(cli("pso " + case9() + " --seed 42" + o, dir).code == 0);
    }
    for (const char* name : {"trace_exact.csv", "trace_approx.csv", "comparison.csv", "comparison.txt", "lines.csv",
                             "pso_trace.csv", "pso_summary.txt", "objective_exact.svg", "voltage_approx.svg"}) {
        CAPTURE(name);
        const auto x = slurp(a / name);
        CHECK_FALSE(x.empty());
        CHECK(x == slurp(b / name));
    }
}

TEST_CASE("output directory from the environment") {
    auto dir = scratch("env");
    auto r = cli("run " + case9() + " --mode approx", dir, "GRIDFLOW_OUT='" + dir.string() + "'");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "trace_approx.csv"));
}

TEST_CASE("pf dump") {
    auto dir = scratch("dump");
    auto r = cli("run " + case9() + " --dump-pf --out '" + dir.string() + "'", dir);
    CHECK(r.code == 0);
    CHECK(first_line(slurp(dir / "ybus.csv")) == "i,j,g,b");
    CHECK(first_line(slurp(dir / "pf_mismatch.csv")) == "iteration,max_mismatch");
}

TEST_CASE("imported case with source overlay") {
    auto dir = scratch("cdf");
    auto r = cli("compare --case '" + data_path("ieee162_synthetic.cdf").string() + "' --sources '" +
                     data_path("ieee162.sources").string() + "' --horizon 300 --no-timing --out '" + dir.string() + "'",
                 dir);
    CHECK(r.code == 0);
    CHECK_THAT(slurp(dir / "comparison.txt"), ContainsSubstring("ieee162-with approximation"));
}
