#pragma once

// Network readers and writers: IEEE Common Data Format (fixed-column text)
// and the native JSON document.

#include "capplan/errors.hpp"
#include "capplan/network.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace capplan {

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Columns [first, last], 1-based inclusive, clipped to the line length.
inline std::string_view columns(std::string_view line, std::size_t first, std::size_t last)
{
    if (first > line.size())
        return {};
    return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

inline double number_at(std::string_view line, std::size_t first, std::size_t last, int lineno,
                        const char *field)
{
    auto text = trim(columns(line, first, last));
    if (text.empty())
        return 0.0;
    if (text.front() == '+')
        text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(std::string("bad ") + field + " '" + std::string(text) + "'", lineno);
    return value;
}

inline int integer_at(std::string_view line, std::size_t first, std::size_t last, int lineno,
                      const char *field)
{
    auto text = trim(columns(line, first, last));
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(std::string("bad ") + field + " '" + std::string(text) + "'", lineno);
    return value;
}

inline bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

} // namespace detail

/// Parse an IEEE Common Data Format document into a per-unit Network.
///
/// Only the title card, the bus section and the branch section are read;
/// every other section is skipped. Bus type codes 3, 2 and 0/1 map to slack,
/// PV and PQ. Generation at PQ buses is folded into their load.
inline Network parse_network(std::string_view text)
{
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos <= text.size();) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            if (pos < text.size())
                lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.empty())
        throw ParseError("empty document", 1);

    const double base_mva = detail::number_at(lines[0], 32, 37, 1, "MVA base");
    if (!(base_mva > 0.0))
        throw ParseError("MVA base must be positive", 1);

    std::vector<Bus> buses;
    std::vector<Branch> branches;
    bool have_buses = false, have_branches = false;
    const auto eof_line = static_cast<int>(lines.size()) + 1;

    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto header = detail::trim(lines[i]);
        if (detail::starts_with(header, "BUS DATA FOLLOWS")) {
            have_buses = true;
            for (++i;; ++i) {
                if (i >= lines.size())
                    throw ParseError("bus section not terminated by -999", eof_line);
                const auto line = lines[i];
                const auto lineno = static_cast<int>(i) + 1;
                if (detail::starts_with(detail::trim(line), "-999"))
                    break;
                if (detail::trim(line).empty())
                    continue;
                Bus b;
                b.id = detail::integer_at(line, 1, 4, lineno, "bus number");
                b.name = std::string(detail::trim(detail::columns(line, 6, 17)));
                const int type = detail::integer_at(line, 25, 26, lineno, "bus type");
                switch (type) {
                case 3: b.kind = BusKind::Slack; break;
                case 2: b.kind = BusKind::PV; break;
                case 0:
                case 1: b.kind = BusKind::PQ; break;
                default: throw ParseError("unknown bus type " + std::to_string(type), lineno);
                }
                const double v_final = detail::number_at(line, 28, 33, lineno, "voltage");
                const double angle_deg = detail::number_at(line, 34, 40, lineno, "angle");
                const double p_load = detail::number_at(line, 41, 49, lineno, "load MW");
                const double q_load = detail::number_at(line, 50, 58, lineno, "load MVAR");
                const double p_gen = detail::number_at(line, 59, 67, lineno, "generation MW");
                const double q_gen = detail::number_at(line, 68, 75, lineno, "generation MVAR");
                const double v_desired = detail::number_at(line, 85, 90, lineno, "desired voltage");
                const double g_shunt = detail::number_at(line, 107, 114, lineno, "shunt G");
                const double b_shunt = detail::number_at(line, 115, 122, lineno, "shunt B");
                if (g_shunt != 0.0)
                    throw ValidationError("bus " + std::to_string(b.id) +
                                          ": shunt conductance is not supported");

                b.p_load = p_load / base_mva;
                b.q_load = q_load / base_mva;
                if (b.kind == BusKind::PQ) {
                    b.p_load -= p_gen / base_mva;
                    b.q_load -= q_gen / base_mva;
                } else {
                    b.p_gen = p_gen / base_mva;
                }
                b.v_start = v_final > 0.0 ? v_final : 1.0;
                b.angle_start = angle_deg * std::numbers::pi / 180.0;
                b.v_setpoint = v_desired > 0.0 ? v_desired : b.v_start;
                b.shunt_b = b_shunt;
                buses.push_back(std::move(b));
            }
        } else if (detail::starts_with(header, "BRANCH DATA FOLLOWS")) {
            have_branches = true;
            for (++i;; ++i) {
                if (i >= lines.size())
                    throw ParseError("branch section not terminated by -999", eof_line);
                const auto line = lines[i];
                const auto lineno = static_cast<int>(i) + 1;
                if (detail::starts_with(detail::trim(line), "-999"))
                    break;
                if (detail::trim(line).empty())
                    continue;
                Branch br;
                br.from_bus = detail::integer_at(line, 1, 4, lineno, "tap bus number");
                br.to_bus = detail::integer_at(line, 6, 9, lineno, "Z bus number");
                br.r = detail::number_at(line, 20, 29, lineno, "resistance");
                br.x = detail::number_at(line, 30, 40, lineno, "reactance");
                br.b_charging = detail::number_at(line, 41, 50, lineno, "line charging");
                const double rating = detail::number_at(line, 51, 55, lineno, "MVA rating");
                const double ratio = detail::number_at(line, 77, 82, lineno, "turns ratio");
                const double shift = detail::number_at(line, 84, 90, lineno, "phase shift");
                if (shift != 0.0)
                    throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                          std::to_string(br.to_bus) + ": phase shifters are not supported");
                br.tap = ratio == 0.0 ? 1.0 : ratio;
                if (rating > 0.0)
                    br.flow_limit = rating / base_mva;
                branches.push_back(br);
            }
        }
    }
    if (!have_buses)
        throw ParseError("missing BUS DATA section", eof_line);
    if (!have_branches)
        throw ParseError("missing BRANCH DATA section", eof_line);
    return Network(base_mva, std::move(buses), std::move(branches));
}

inline std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Network load_network(const std::string &path) { return parse_network(read_file(path)); }

// --- native JSON document -------------------------------------------------

inline BusKind bus_kind_from_string(const std::string &s)
{
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::PV;
    if (s == "pq") return BusKind::PQ;
    throw ValidationError("unknown bus kind '" + s + "'");
}

inline nlohmann::json to_json(const Network &net)
{
    nlohmann::json doc;
    doc["base_mva"] = net.base_mva();
    auto &buses = doc["buses"] = nlohmann::json::array();
    for (const auto &b : net.buses()) {
        buses.push_back({{"id", b.id},
                         {"name", b.name},
                         {"kind", to_string(b.kind)},
                         {"p_load", b.p_load},
                         {"q_load", b.q_load},
                         {"p_gen", b.p_gen},
                         {"v_setpoint", b.v_setpoint},
                         {"shunt_b", b.shunt_b},
                         {"v_min", b.v_min},
                         {"v_max", b.v_max},
                         {"v_start", b.v_start},
                         {"angle_start", b.angle_start}});
    }
    auto &branches = doc["branches"] = nlohmann::json::array();
    for (const auto &br : net.branches()) {
        nlohmann::json j = {{"from_bus", br.from_bus}, {"to_bus", br.to_bus}, {"r", br.r},
                            {"x", br.x}, {"b_charging", br.b_charging}, {"tap", br.tap}};
        j["flow_limit"] = br.flow_limit ? nlohmann::json(*br.flow_limit) : nlohmann::json(nullptr);
        branches.push_back(std::move(j));
    }
    return doc;
}

inline Network network_from_json(const nlohmann::json &doc)
{
    try {
        std::vector<Bus> buses;
        for (const auto &j : doc.at("buses")) {
            Bus b;
            b.id = j.at("id").get<BusId>();
            b.name = j.value("name", std::string{});
            b.kind = bus_kind_from_string(j.at("kind").get<std::string>());
            b.p_load = j.value("p_load", 0.0);
            b.q_load = j.value("q_load", 0.0);
            b.p_gen = j.value("p_gen", 0.0);
            b.v_setpoint = j.value("v_setpoint", 1.0);
            b.shunt_b = j.value("shunt_b", 0.0);
            b.v_min = j.value("v_min", 0.95);
            b.v_max = j.value("v_max", 1.06);
            b.v_start = j.value("v_start", 1.0);
            b.angle_start = j.value("angle_start", 0.0);
            buses.push_back(std::move(b));
        }
        std::vector<Branch> branches;
        for (const auto &j : doc.at("branches")) {
            Branch br;
            br.from_bus = j.at("from_bus").get<BusId>();
            br.to_bus = j.at("to_bus").get<BusId>();
            br.r = j.at("r").get<double>();
            br.x = j.at("x").get<double>();
            br.b_charging = j.value("b_charging", 0.0);
            br.tap = j.value("tap", 1.0);
            if (j.contains("flow_limit") && !j["flow_limit"].is_null())
                br.flow_limit = j["flow_limit"].get<double>();
            branches.push_back(br);
        }
        return Network(doc.at("base_mva").get<double>(), std::move(buses), std::move(branches));
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("malformed network document: ") + e.what());
    }
}

} // namespace capplan
