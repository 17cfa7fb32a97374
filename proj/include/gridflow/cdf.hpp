#pragma once

// One-way import of IEEE Common Data Format files (the fixed-column layout of
// the UW power systems test case archive). Only the title card, bus data and
// branch data are used; the remaining sections are skipped with a warning.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gridflow/case_io.hpp"
#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"

namespace gridflow {

struct CdfImport {
    Network network;
    double base_mva = 100.0;
    std::vector<std::string> warnings;
};

namespace detail {

/// 1-based inclusive column range, blank-padded when the card is short.
inline std::string_view columns(std::string_view card, std::size_t first, std::size_t last) {
    if (card.size() < first) return {};
    auto len = std::min(last, card.size()) - (first - 1);
    return trim(card.substr(first - 1, len));
}

inline double cdf_real(std::string_view card, std::size_t first, std::size_t last, std::size_t record,
                       std::string_view field, bool required = true) {
    auto tok = columns(card, first, last);
    if (tok.empty()) {
        if (required) throw ParseError(fmt::format("record {}: missing {} (columns {}-{})", record, field, first, last));
        return 0.0;
    }
    try {
        return parse_double(tok, 0, field);
    } catch (const ParseError&) {
        throw ParseError(fmt::format("record {}: unparseable {} '{}' (columns {}-{})", record, field, tok, first, last));
    }
}

inline int cdf_int(std::string_view card, std::size_t first, std::size_t last, std::size_t record,
                   std::string_view field, bool required = true) {
    auto tok = columns(card, first, last);
    if (tok.empty()) {
        if (required) throw ParseError(fmt::format("record {}: missing {} (columns {}-{})", record, field, first, last));
        return 0;
    }
    try {
        return parse_int(tok, 0, field);
    } catch (const ParseError&) {
        throw ParseError(fmt::format("record {}: unparseable {} '{}' (columns {}-{})", record, field, tok, first, last));
    }
}

inline bool starts_with_word(std::string_view line, std::string_view word) {
    auto t = trim(line);
    return t.substr(0, word.size()) == word;
}

}  // namespace detail

/// Imports a CDF document. Powers are divided by the title-card MVA base;
/// angles are re-referenced to the slack bus and converted to radians.
inline CdfImport import_ieee_cdf(std::string_view text) {
    std::vector<std::string_view> cards;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        auto card = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!card.empty() && card.back() == '\r') card.remove_suffix(1);
        cards.push_back(card);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
    }

    std::size_t i = 0;
    while (i < cards.size() && detail::trim(cards[i]).empty()) ++i;
    if (i == cards.size()) throw ParseError("missing title card");

    CdfImport out;
    const std::size_t title_record = i + 1;
    out.base_mva = detail::cdf_real(cards[i], 32, 37, title_record, "MVA base");
    if (!(out.base_mva > 0.0)) throw ParseError(fmt::format("record {}: MVA base must be positive", title_record));
    out.network.name = std::string(detail::columns(cards[i], 46, 73));
    ++i;

    bool saw_bus = false;
    bool saw_branch = false;
    double slack_angle = 0.0;
    const double base = out.base_mva;

    auto skip_section = [&](std::string_view header, std::string_view terminator) {
        out.warnings.push_back(fmt::format("skipped section '{}'", detail::trim(header)));
        ++i;
        while (i < cards.size() && !detail::starts_with_word(cards[i], terminator)) ++i;
        if (i == cards.size()) throw ParseError(fmt::format("section '{}' is not terminated", detail::trim(header)));
        ++i;
    };

    while (i < cards.size()) {
        auto card = cards[i];
        auto t = detail::trim(card);
        if (t.empty()) {
            ++i;
            continue;
        }
        if (detail::starts_with_word(card, "BUS DATA FOLLOWS")) {
            saw_bus = true;
            ++i;
            for (; i < cards.size(); ++i) {
                auto c = cards[i];
                if (detail::starts_with_word(c, "-999")) break;
                const std::size_t rec = i + 1;
                Bus b;
                b.id = BusId{detail::cdf_int(c, 1, 4, rec, "bus number")};
                int type = detail::cdf_int(c, 25, 26, rec, "bus type");
                switch (type) {
                    case 0:
                    case 1: b.kind = BusKind::PQ; break;
                    case 2: b.kind = BusKind::PV; break;
                    case 3: b.kind = BusKind::Slack; break;
                    default: throw ParseError(fmt::format("record {}: unknown bus type {}", rec, type));
                }
                b.v_init = detail::cdf_real(c, 28, 33, rec, "final voltage");
                double angle_deg = detail::cdf_real(c, 34, 40, rec, "final angle");
                b.delta_init = angle_deg * std::numbers::pi / 180.0;
                b.p_load = detail::cdf_real(c, 41, 49, rec, "load MW") / base;
                b.q_load = detail::cdf_real(c, 50, 59, rec, "load MVAR") / base;
                b.p_gen = detail::cdf_real(c, 60, 67, rec, "generation MW") / base;
                b.q_gen = detail::cdf_real(c, 68, 75, rec, "generation MVAR") / base;
                double desired = detail::cdf_real(c, 85, 90, rec, "desired volts", false);
                b.g_shunt = detail::cdf_real(c, 107, 114, rec, "shunt G", false);
                b.b_shunt = detail::cdf_real(c, 115, 122, rec, "shunt B", false);
                if (desired > 0.0 && b.kind != BusKind::PQ) b.v_init = desired;
                b.v_ref = desired > 0.0 ? desired : 1.0;
                if (b.kind == BusKind::Slack) slack_angle = b.delta_init;
                out.network.buses.push_back(b);
            }
            if (i == cards.size()) throw ParseError("bus data section is not terminated by -999");
            ++i;
        } else if (detail::starts_with_word(card, "BRANCH DATA FOLLOWS")) {
            saw_branch = true;
            ++i;
            for (; i < cards.size(); ++i) {
                auto c = cards[i];
                if (detail::starts_with_word(c, "-999")) break;
                const std::size_t rec = i + 1;
                Branch br;
                br.from = BusId{detail::cdf_int(c, 1, 4, rec, "tap bus number")};
                br.to = BusId{detail::cdf_int(c, 6, 9, rec, "Z bus number")};
                br.r = detail::cdf_real(c, 20, 29, rec, "resistance");
                br.x = detail::cdf_real(c, 30, 40, rec, "reactance");
                br.b_charging = detail::cdf_real(c, 41, 50, rec, "line charging");
                double ratio = detail::cdf_real(c, 77, 82, rec, "turns ratio", false);
                double shift = detail::cdf_real(c, 84, 90, rec, "phase shift", false);
                if (ratio != 0.0 && ratio != 1.0) {
                    out.warnings.push_back(
                        fmt::format("record {}: tap ratio {} on {}-{} ignored", rec, ratio, br.from.value, br.to.value));
                }
                if (shift != 0.0) {
                    out.warnings.push_back(
                        fmt::format("record {}: phase shift {} on {}-{} ignored", rec, shift, br.from.value, br.to.value));
                }
                out.network.branches.push_back(br);
            }
            if (i == cards.size()) throw ParseError("branch data section is not terminated by -999");
            ++i;
        } else if (detail::starts_with_word(card, "LOSS ZONES FOLLOWS")) {
            skip_section(card, "-99");
        } else if (detail::starts_with_word(card, "INTERCHANGE DATA FOLLOWS")) {
            skip_section(card, "-9");
        } else if (detail::starts_with_word(card, "TIE LINES FOLLOWS")) {
            skip_section(card, "-999");
        } else if (detail::starts_with_word(card, "END OF DATA")) {
            break;
        } else {
            throw ParseError(fmt::format("record {}: malformed section header '{}'", i + 1, t));
        }
    }

    if (!saw_bus) throw ParseError("missing BUS DATA section");
    if (!saw_branch) throw ParseError("missing BRANCH DATA section");
    for (auto& b : out.network.buses) b.delta_init -= slack_angle;
    for (auto& b : out.network.buses) {
        if (b.kind == BusKind::Slack) b.delta_init = 0.0;
    }
    detail::throw_if_invalid(out.network);
    return out;
}

inline Network parse_ieee_cdf(std::string_view text) { return import_ieee_cdf(text).network; }

}  // namespace gridflow
