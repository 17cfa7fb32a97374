#pragma once

// Native sectioned case format.
//
//   [meta]    name <text> / angle_unit deg|rad
//   [bus]     id kind V delta Pg Qg Pl Ql Vref [Gs Bs]
//   [branch]  from to r x b_charging
//   [source]  bus qmin qmax a b c vref
//   [weights] w_loss w_dev w_cost
//
// Whitespace-delimited rows, `#` starts a comment. Angles default to degrees.

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"

namespace gridflow {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line, std::string_view what) {
    double v = 0.0;
    // from_chars rejects a leading '+' and bare ".65"-style values are fine.
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw ParseError(fmt::format("cannot parse {} '{}'", what, tok), line);
    }
    return v;
}

inline int parse_int(std::string_view tok, std::size_t line, std::string_view what) {
    int v = 0;
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError(fmt::format("cannot parse {} '{}'", what, tok), line);
    }
    return v;
}

inline BusKind parse_kind(std::string_view tok, std::size_t line) {
    auto k = lower(tok);
    if (k == "slack" || k == "swing" || k == "ref") return BusKind::Slack;
    if (k == "pv") return BusKind::PV;
    if (k == "pq") return BusKind::PQ;
    throw ParseError(fmt::format("unknown bus kind '{}'", tok), line);
}

/// Sections as read, before the document-level checks of `parse_case`.
struct CaseDocument {
    std::string name;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<ReactiveSource> sources;
    std::optional<Weights> weights;
    bool has_bus_section = false;
    bool has_branch_section = false;
};

inline CaseDocument read_document(std::string_view text) {
    enum class Section { None, Meta, Bus, Branch, Source, Weights };
    CaseDocument doc;
    Section section = Section::None;
    bool degrees = true;
    std::size_t line_no = 0;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        auto hash = raw.find('#');
        auto line = trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no);
            auto name = lower(trim(line.substr(1, line.size() - 2)));
            if (name == "meta") section = Section::Meta;
            else if (name == "bus") { section = Section::Bus; doc.has_bus_section = true; }
            else if (name == "branch") { section = Section::Branch; doc.has_branch_section = true; }
            else if (name == "source") section = Section::Source;
            else if (name == "weights") section = Section::Weights;
            else throw ParseError(fmt::format("unknown section [{}]", name), line_no);
            continue;
        }

        auto tok = split_ws(line);
        auto need = [&](std::size_t lo, std::size_t hi, std::string_view what) {
            if (tok.size() < lo || tok.size() > hi) {
                throw ParseError(fmt::format("{} row expects {} fields, got {}", what,
                                             lo == hi ? fmt::format("{}", lo) : fmt::format("{}-{}", lo, hi),
                                             tok.size()),
                                 line_no);
            }
        };

        switch (section) {
            case Section::None:
                throw ParseError("data outside of any section", line_no);
            case Section::Meta: {
                auto key = lower(tok[0]);
                auto value = trim(line.substr(tok[0].size()));
                if (key == "name") {
                    doc.name = std::string(value);
                } else if (key == "angle_unit") {
                    auto unit = lower(value);
                    if (unit == "deg" || unit == "degree" || unit == "degrees") degrees = true;
                    else if (unit == "rad" || unit == "radian" || unit == "radians") degrees = false;
                    else throw ParseError(fmt::format("unknown angle_unit '{}'", value), line_no);
                } else {
                    throw ParseError(fmt::format("unknown meta key '{}'", tok[0]), line_no);
                }
                break;
            }
            case Section::Bus: {
                need(9, 11, "bus");
                if (tok.size() == 10) throw ParseError("bus row shunt columns come in pairs (Gs Bs)", line_no);
                Bus b;
                b.id = BusId{parse_int(tok[0], line_no, "bus id")};
                b.kind = parse_kind(tok[1], line_no);
                b.v_init = parse_double(tok[2], line_no, "V");
                double angle = parse_double(tok[3], line_no, "delta");
                b.delta_init = degrees ? angle * std::numbers::pi / 180.0 : angle;
                b.p_gen = parse_double(tok[4], line_no, "Pg");
                b.q_gen = parse_double(tok[5], line_no, "Qg");
                b.p_load = parse_double(tok[6], line_no, "Pl");
                b.q_load = parse_double(tok[7], line_no, "Ql");
                b.v_ref = parse_double(tok[8], line_no, "Vref");
                if (tok.size() == 11) {
                    b.g_shunt = parse_double(tok[9], line_no, "Gs");
                    b.b_shunt = parse_double(tok[10], line_no, "Bs");
                }
                doc.buses.push_back(b);
                break;
            }
            case Section::Branch: {
                need(5, 5, "branch");
                doc.branches.push_back(Branch{BusId{parse_int(tok[0], line_no, "from bus")},
                                              BusId{parse_int(tok[1], line_no, "to bus")},
                                              parse_double(tok[2], line_no, "r"), parse_double(tok[3], line_no, "x"),
                                              parse_double(tok[4], line_no, "b_charging")});
                break;
            }
            case Section::Source: {
                need(7, 7, "source");
                doc.sources.push_back(ReactiveSource{BusId{parse_int(tok[0], line_no, "source bus")},
                                                     parse_double(tok[1], line_no, "qmin"),
                                                     parse_double(tok[2], line_no, "qmax"),
                                                     parse_double(tok[3], line_no, "a"),
                                                     parse_double(tok[4], line_no, "b"),
                                                     parse_double(tok[5], line_no, "c"),
                                                     parse_double(tok[6], line_no, "vref")});
                break;
            }
            case Section::Weights: {
                need(3, 3, "weights");
                if (doc.weights) throw ParseError("duplicate weights row", line_no);
                doc.weights = Weights{parse_double(tok[0], line_no, "w_loss"), parse_double(tok[1], line_no, "w_dev"),
                                      parse_double(tok[2], line_no, "w_cost")};
                break;
            }
        }
    }
    return doc;
}

inline void throw_if_invalid(const Network& net) {
    auto violations = validate(net);
    if (violations.empty()) return;
    std::string msg = violations.front();
    for (std::size_t i = 1; i < violations.size(); ++i) msg += "; " + violations[i];
    throw ValidationError(msg);
}

}  // namespace detail

/// Parses a native case document into a validated Network.
inline Network parse_case(std::string_view text) {
    auto doc = detail::read_document(text);
    if (!doc.has_bus_section) throw ParseError("missing [bus] section");
    Network net;
    net.name = doc.name;
    net.buses = std::move(doc.buses);
    net.branches = std::move(doc.branches);
    net.sources = std::move(doc.sources);
    if (doc.weights) net.weights = *doc.weights;
    detail::throw_if_invalid(net);
    return net;
}

/// Serializes to the native format. Angles are written in degrees with
/// round-trip precision.
inline std::string write_case(const Network& net) {
    std::string out;
    auto emit = [&out](std::string s) { out += s; out += '\n'; };
    emit("[meta]");
    if (!net.name.empty()) emit(fmt::format("name {}", net.name));
    emit("angle_unit deg");
    emit("");
    emit("[bus]");
    emit("# id kind V delta Pg Qg Pl Ql Vref [Gs Bs]");
    for (const Bus& b : net.buses) {
        auto row = fmt::format("{} {} {} {} {} {} {} {} {}", b.id.value, to_string(b.kind), b.v_init,
                               b.delta_init * 180.0 / std::numbers::pi, b.p_gen, b.q_gen, b.p_load, b.q_load, b.v_ref);
        if (b.g_shunt != 0.0 || b.b_shunt != 0.0) row += fmt::format(" {} {}", b.g_shunt, b.b_shunt);
        emit(row);
    }
    emit("");
    emit("[branch]");
    emit("# from to r x b_charging");
    for (const Branch& br : net.branches) {
        emit(fmt::format("{} {} {} {} {}", br.from.value, br.to.value, br.r, br.x, br.b_charging));
    }
    emit("");
    emit("[source]");
    emit("# bus qmin qmax a b c vref");
    for (const ReactiveSource& s : net.sources) {
        emit(fmt::format("{} {} {} {} {} {} {}", s.bus.value, s.q_min, s.q_max, s.a_p, s.b_p, s.c_p, s.v_ref));
    }
    emit("");
    emit("[weights]");
    emit("# w_loss w_dev w_cost");
    emit(fmt::format("{} {} {}", net.weights.loss, net.weights.dev, net.weights.cost));
    return out;
}

/// Adds the `[source]` rows (and `[weights]`, when present) of a native
/// document to an existing network, then revalidates. Used to equip an
/// imported CDF case with controllable sources.
inline Network apply_source_overlay(Network net, std::string_view overlay_text) {
    auto doc = detail::read_document(overlay_text);
    if (!doc.buses.empty() || !doc.branches.empty()) {
        throw ParseError("source overlay may only contain [meta], [source] and [weights]");
    }
    for (auto& s : doc.sources) net.sources.push_back(s);
    if (doc.weights) net.weights = *doc.weights;
    if (!doc.name.empty()) net.name = doc.name;
    detail::throw_if_invalid(net);
    return net;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace gridflow
