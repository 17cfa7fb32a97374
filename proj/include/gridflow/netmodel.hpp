#pragma once

// Problem-instance data model: buses, branches, controllable reactive sources
// and objective weights. A Network is built once and treated as immutable.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace gridflow {

/// 1-based bus number as it appears in case files.
struct BusId {
    int value = 0;

    friend constexpr auto operator<=>(BusId, BusId) = default;
};

enum class BusKind { Slack, PV, PQ };

inline std::string_view to_string(BusKind kind) {
    switch (kind) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "?";
}

/// Per-unit bus record. Angles are radians internally.
struct Bus {
    BusId id;
    BusKind kind = BusKind::PQ;
    double v_init = 1.0;
    double delta_init = 0.0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double p_load = 0.0;
    double q_load = 0.0;
    double v_ref = 1.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
};

/// Pi-model line; `b_charging` is the total charging susceptance.
struct Branch {
    BusId from;
    BusId to;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
};

/// Controllable reactive injector with its real-power cost coefficients.
struct ReactiveSource {
    BusId bus;
    double q_min = 0.0;
    double q_max = 0.0;
    double a_p = 0.0;
    double b_p = 0.0;
    double c_p = 0.0;
    double v_ref = 1.0;
};

struct Weights {
    double loss = 1.0;
    double dev = 1.0;
    double cost = 0.0005;
};

struct Network {
    std::string name;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<ReactiveSource> sources;
    Weights weights;

    [[nodiscard]] std::optional<std::size_t> find(BusId id) const {
        auto it = std::find_if(buses.begin(), buses.end(), [id](const Bus& b) { return b.id == id; });
        if (it == buses.end()) return std::nullopt;
        return static_cast<std::size_t>(it - buses.begin());
    }

    /// Index of `id` in `buses`; throws std::out_of_range for unknown ids.
    [[nodiscard]] std::size_t index_of(BusId id) const {
        if (auto i = find(id)) return *i;
        throw std::out_of_range(fmt::format("unknown bus {}", id.value));
    }

    [[nodiscard]] std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (buses[i].kind == BusKind::Slack) return i;
        }
        throw std::out_of_range("network has no slack bus");
    }

    /// Bus index of each source, in source order.
    [[nodiscard]] std::vector<std::size_t> source_bus_indices() const {
        std::vector<std::size_t> out;
        out.reserve(sources.size());
        for (const auto& s : sources) out.push_back(index_of(s.bus));
        return out;
    }

    [[nodiscard]] std::vector<double> q_lower() const {
        std::vector<double> out;
        for (const auto& s : sources) out.push_back(s.q_min);
        return out;
    }

    [[nodiscard]] std::vector<double> q_upper() const {
        std::vector<double> out;
        for (const auto& s : sources) out.push_back(s.q_max);
        return out;
    }
};

/// Checks every structural invariant and returns one message per violation.
/// An empty result means the network is usable by the solvers.
inline std::vector<std::string> validate(const Network& net) {
    std::vector<std::string> out;
    std::map<int, std::size_t> seen;
    int slack_count = 0;

    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const Bus& b = net.buses[i];
        if (b.id.value < 1) out.push_back(fmt::format("bus id {} must be >= 1", b.id.value));
        if (!seen.emplace(b.id.value, i).second) out.push_back(fmt::format("duplicate bus {}", b.id.value));
        if (!(b.v_init > 0.0)) out.push_back(fmt::format("non-positive voltage at bus {}", b.id.value));
        if (b.kind == BusKind::Slack) {
            ++slack_count;
            if (b.delta_init != 0.0) out.push_back(fmt::format("slack bus {} has non-zero angle", b.id.value));
        }
    }
    if (net.buses.empty()) out.emplace_back("network has no buses");
    if (slack_count == 0 && !net.buses.empty()) out.emplace_back("missing slack bus");
    if (slack_count > 1) out.emplace_back("multiple slack buses");

    auto known = [&](BusId id) { return seen.count(id.value) > 0; };
    bool dangling = false;
    for (const Branch& br : net.branches) {
        for (BusId end : {br.from, br.to}) {
            if (!known(end)) {
                out.push_back(fmt::format("dangling branch endpoint {}", end.value));
                dangling = true;
            }
        }
        if (br.from == br.to) out.push_back(fmt::format("branch {}-{} connects a bus to itself", br.from.value, br.to.value));
        if (br.x == 0.0) out.push_back(fmt::format("zero reactance on branch {}-{}", br.from.value, br.to.value));
        if (br.r < 0.0) out.push_back(fmt::format("negative resistance on branch {}-{}", br.from.value, br.to.value));
        if (br.b_charging < 0.0) {
            out.push_back(fmt::format("negative line charging on branch {}-{}", br.from.value, br.to.value));
        }
    }

    std::map<int, int> per_bus;
    for (const ReactiveSource& s : net.sources) {
        if (!known(s.bus)) {
            out.push_back(fmt::format("source at unknown bus {}", s.bus.value));
            continue;
        }
        if (!(s.q_min < s.q_max)) out.push_back(fmt::format("empty control interval at bus {}", s.bus.value));
        if (net.buses[seen[s.bus.value]].kind != BusKind::PQ) {
            out.push_back(fmt::format("source at non-PQ bus {}", s.bus.value));
        }
        if (++per_bus[s.bus.value] == 2) out.push_back(fmt::format("multiple sources at bus {}", s.bus.value));
    }

    const Weights& w = net.weights;
    if (w.loss < 0.0 || w.dev < 0.0 || w.cost < 0.0) out.emplace_back("negative objective weight");
    if (w.loss == 0.0 && w.dev == 0.0 && w.cost == 0.0) out.emplace_back("all objective weights are zero");

    // Connectivity is only meaningful once every endpoint resolves.
    if (!dangling && !net.buses.empty() && seen.size() == net.buses.size()) {
        std::vector<std::vector<std::size_t>> adj(net.buses.size());
        for (const Branch& br : net.branches) {
            auto a = seen[br.from.value];
            auto b = seen[br.to.value];
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<bool> reached(net.buses.size(), false);
        std::queue<std::size_t> todo;
        todo.push(0);
        reached[0] = true;
        while (!todo.empty()) {
            auto u = todo.front();
            todo.pop();
            for (auto v : adj[u]) {
                if (!reached[v]) {
                    reached[v] = true;
                    todo.push(v);
                }
            }
        }
        for (std::size_t i = 0; i < reached.size(); ++i) {
            if (!reached[i]) out.push_back(fmt::format("bus {} is not connected to the network", net.buses[i].id.value));
        }
    }
    return out;
}

/// Reference magnitude used in the voltage-deviation term for bus `i`: the
/// hosted source's setting when present, otherwise the bus's own.
inline double deviation_reference(const Network& net, std::size_t bus) {
    for (const auto& s : net.sources) {
        if (s.bus == net.buses[bus].id) return s.v_ref;
    }
    return net.buses[bus].v_ref;
}

}  // namespace gridflow
