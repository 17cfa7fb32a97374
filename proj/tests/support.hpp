#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gridflow/gridflow.hpp"

namespace gridflow::testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(GRIDFLOW_DATA_DIR) / name; }

inline Network ieee9() { return parse_case(read_text_file(data_path("ieee9.case"))); }

inline std::vector<LoadEvent> table4() { return parse_events(read_text_file(data_path("table4.events"))); }

inline Network ieee162() {
    auto net = parse_ieee_cdf(read_text_file(data_path("ieee162_synthetic.cdf")));
    return apply_source_overlay(std::move(net), read_text_file(data_path("ieee162.sources")));
}

/// Uniform control vectors strictly inside the source box.
inline std::vector<std::vector<double>> sample_controls(const Network& net, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out;
    for (int n = 0; n < count; ++n) {
        std::vector<double> q;
        for (const auto& s : net.sources) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            q.push_back(s.q_min + (0.05 + 0.9 * u) * (s.q_max - s.q_min));
        }
        out.push_back(std::move(q));
    }
    return out;
}

/// Two buses, one branch, no load.
inline Network two_bus(double p_load = 0.0, double q_load = 0.0) {
    Network net;
    net.name = "two-bus";
    Bus slack;
    slack.id = BusId{1};
    slack.kind = BusKind::Slack;
    slack.v_init = 1.0;
    Bus load;
    load.id = BusId{2};
    load.p_load = p_load;
    load.q_load = q_load;
    net.buses = {slack, load};
    net.branches = {Branch{BusId{1}, BusId{2}, 0.01, 0.1, 0.0}};
    net.sources = {ReactiveSource{BusId{2}, -1.0, 1.0, 0.05, 1.0, 10.0, 1.0}};
    return net;
}

/// The 9-bus network with every load removed.
inline Network zero_load9() {
    auto net = ieee9();
    for (auto& b : net.buses) {
        b.p_load = b.q_load = 0.0;
        if (b.kind == BusKind::PV) b.p_gen = 0.0;
    }
    return net;
}

}  // namespace gridflow::testing
