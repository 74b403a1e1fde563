#pragma once

// Report rendering. Every run is first turned into a structured JSON
// document; tables and CSV files are rendered from that document so the
// three formats always agree.

#include "capplan/errors.hpp"
#include "capplan/network.hpp"
#include "capplan/placement.hpp"
#include "capplan/power_flow.hpp"
#include "capplan/sensitivity.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace capplan {

enum class ReportFormat { Table, Csv, Structured };

inline ReportFormat report_format_from_string(const std::string &s)
{
    if (s == "table") return ReportFormat::Table;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "structured") return ReportFormat::Structured;
    throw ValidationError("unknown output format '" + s + "'");
}

/// A named output document (file name relative to the output directory).
struct Document
{
    std::string name;
    std::string content;
};

namespace detail {

/// NaN becomes null in JSON; read it back as NaN.
inline double num(const nlohmann::json &j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::string fixed(double v, int decimals)
{
    if (!std::isfinite(v))
        return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string full(double v)
{
    if (!std::isfinite(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string pad(const std::string &s, std::size_t width)
{
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string &s, std::size_t width)
{
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline nlohmann::json cost_json(const CostReport &r)
{
    return {{"converged", r.converged},       {"p_loss_pu", r.p_loss_pu},
            {"p_loss_kw", r.p_loss_kw},       {"loss_cost", r.loss_cost},
            {"capacitor_cost", r.capacitor_cost}, {"total_cost", r.total_cost},
            {"min_voltage", r.min_voltage},   {"max_voltage", r.max_voltage},
            {"penalty", r.penalty},           {"feasible", r.feasible}};
}

inline nlohmann::json records_json(const std::vector<LossSensitivityRecord> &records)
{
    auto out = nlohmann::json::array();
    for (const auto &r : records)
        out.push_back({{"from", r.from_bus},
                       {"to", r.to_bus},
                       {"lsf", r.lsf},
                       {"end_bus", r.end_bus},
                       {"bus_voltage", r.end_bus_voltage},
                       {"norm", r.norm_voltage}});
    return out;
}

inline nlohmann::json candidates_json(const CandidateSet &set)
{
    auto out = nlohmann::json::array();
    for (const auto &c : set.ranked)
        out.push_back({{"bus", c.bus}, {"score", c.score}, {"voltage", c.voltage}});
    return out;
}

} // namespace detail

// --- placement ------------------------------------------------------------

inline nlohmann::json placement_to_json(const PlacementResult &result, const Network &net)
{
    const double base = net.base_mva();
    nlohmann::json doc;
    doc["kind"] = "placement";
    doc["seed"] = result.seed;
    doc["base_mva"] = base;
    doc["evaluations"] = result.evaluations;
    doc["voltage_screen_relaxed"] = result.voltage_screen_relaxed;
    doc["candidates"] = detail::candidates_json(result.candidate_buses);
    doc["before"] = detail::cost_json(result.before);
    doc["after"] = detail::cost_json(result.after);

    auto voltage_of = [&](const CostReport &r, BusId id) {
        return r.bus_voltage.empty() ? std::numeric_limits<double>::quiet_NaN() : r.bus_voltage[net.index_of(id)];
    };

    auto plan = nlohmann::json::array();
    std::size_t k = 0;
    for (const auto &c : result.candidate_buses.ranked) {
        auto it = result.plan.q_pu.find(c.bus);
        const double q = it == result.plan.q_pu.end() ? 0.0 : it->second;
        const double limit = k < result.size_limits.size() ? result.size_limits[k] : 0.0;
        ++k;
        if (it == result.plan.q_pu.end())
            continue;
        plan.push_back({{"bus", c.bus},
                        {"size_pu", q},
                        {"size_mvar", q * base},
                        {"limit_mvar", limit * base},
                        {"v_before", voltage_of(result.before, c.bus)},
                        {"v_after", voltage_of(result.after, c.bus)}});
    }
    doc["plan"] = std::move(plan);
    doc["total_mvar"] = result.plan.total_pu() * base;

    auto profile = nlohmann::json::array();
    for (const auto &b : net.buses())
        profile.push_back(
            {{"bus", b.id}, {"v_before", voltage_of(result.before, b.id)}, {"v_after", voltage_of(result.after, b.id)}});
    doc["voltage_profile"] = std::move(profile);
    doc["trace"] = result.trace;
    doc["sensitivity"] = detail::records_json(result.sensitivity);
    doc["diagnostics"] = result.diagnostics;
    return doc;
}

/// Human-readable before/after summary and capacitor table.
inline std::string render_placement_table(const nlohmann::json &doc)
{
    using detail::fixed;
    using detail::num;
    using detail::pad;
    using detail::pad_right;
    std::ostringstream os;
    const auto &before = doc.at("before");
    const auto &after = doc.at("after");

    os << "Capacitor placement (seed " << doc.at("seed").get<std::uint64_t>() << ")\n";
    os << "Candidate buses:";
    if (doc.at("candidates").empty())
        os << " none";
    for (const auto &c : doc.at("candidates"))
        os << ' ' << c.at("bus").get<int>();
    if (doc.at("voltage_screen_relaxed").get<bool>())
        os << " (voltage screen relaxed)";
    os << "\n\n";

    os << "Before and after compensation\n";
    os << pad_right("", 28) << pad("Before", 18) << pad("After", 18) << '\n';
    auto row = [&](const char *label, const char *key, int decimals) {
        os << pad_right(label, 28) << pad(fixed(num(before.at(key)), decimals), 18)
           << pad(fixed(num(after.at(key)), decimals), 18) << '\n';
    };
    row("Active power loss (kW)", "p_loss_kw", 4);
    row("Active power loss (pu)", "p_loss_pu", 8);
    row("Loss cost ($/year)", "loss_cost", 4);
    row("Capacitor cost ($/year)", "capacitor_cost", 4);
    row("Total cost ($/year)", "total_cost", 4);
    row("Minimum voltage (pu)", "min_voltage", 4);
    row("Maximum voltage (pu)", "max_voltage", 4);
    row("Constraint penalty", "penalty", 4);
    os << pad_right("Feasible", 28) << pad(before.at("feasible").get<bool>() ? "yes" : "no", 18)
       << pad(after.at("feasible").get<bool>() ? "yes" : "no", 18) << "\n\n";

    os << "Capacitor sizes\n";
    os << pad_right("Bus", 8) << pad("Size before", 14) << pad("V before", 12) << pad("Size after", 14)
       << pad("V after", 12) << '\n';
    os << pad_right("", 8) << pad("(MVar)", 14) << pad("(pu)", 12) << pad("(MVar)", 14) << pad("(pu)", 12) << '\n';
    for (const auto &p : doc.at("plan"))
        os << pad_right(std::to_string(p.at("bus").get<int>()), 8) << pad(fixed(0.0, 4), 14)
           << pad(fixed(num(p.at("v_before")), 4), 12) << pad(fixed(num(p.at("size_mvar")), 4), 14)
           << pad(fixed(num(p.at("v_after")), 4), 12) << '\n';
    os << pad_right("Total", 8) << pad(fixed(0.0, 4), 14) << pad("---", 12)
       << pad(fixed(num(doc.at("total_mvar")), 4), 14) << pad("---", 12) << '\n';
    os << pad_right("Loss", 8) << pad(fixed(num(before.at("p_loss_kw")), 4) + " kW", 26)
       << pad(fixed(num(after.at("p_loss_kw")), 4) + " kW", 26) << '\n';

    const auto &diag = doc.at("diagnostics");
    if (!diag.empty()) {
        os << "\nNotes\n";
        for (const auto &d : diag)
            os << "- " << d.get<std::string>() << '\n';
    }
    return os.str();
}

inline std::string render_trace_csv(const nlohmann::json &doc)
{
    std::ostringstream os;
    os << "iteration,gbest_cost\n";
    std::size_t it = 1;
    for (const auto &v : doc.at("trace"))
        os << it++ << ',' << detail::full(detail::num(v)) << '\n';
    return os.str();
}

inline std::string render_voltage_csv(const nlohmann::json &doc)
{
    std::ostringstream os;
    os << "bus,v_before,v_after\n";
    for (const auto &r : doc.at("voltage_profile"))
        os << r.at("bus").get<int>() << ',' << detail::full(detail::num(r.at("v_before"))) << ','
           << detail::full(detail::num(r.at("v_after"))) << '\n';
    return os.str();
}

inline std::string render_plan_csv(const nlohmann::json &doc)
{
    std::ostringstream os;
    os << "bus,size_mvar,v_before,v_after\n";
    for (const auto &p : doc.at("plan"))
        os << p.at("bus").get<int>() << ',' << detail::full(detail::num(p.at("size_mvar"))) << ','
           << detail::full(detail::num(p.at("v_before"))) << ',' << detail::full(detail::num(p.at("v_after")))
           << '\n';
    return os.str();
}

inline std::string render_sensitivity_csv(const nlohmann::json &doc)
{
    std::ostringstream os;
    os << "From,To,LSF,End Bus,Bus Voltage,Norm\n";
    for (const auto &r : doc.at("sensitivity"))
        os << r.at("from").get<int>() << ',' << r.at("to").get<int>() << ',' << detail::full(detail::num(r.at("lsf")))
           << ',' << r.at("end_bus").get<int>() << ',' << detail::full(detail::num(r.at("bus_voltage"))) << ','
           << detail::full(detail::num(r.at("norm"))) << '\n';
    return os.str();
}

/// Documents for one output format of a placement run.
inline std::vector<Document> emit_report(const PlacementResult &result, const Network &net, ReportFormat format,
                                         const nlohmann::json &extra = nlohmann::json::object())
{
    nlohmann::json doc = placement_to_json(result, net);
    for (const auto &[k, v] : extra.items())
        doc[k] = v;
    switch (format) {
    case ReportFormat::Table: return {{"place_report.txt", render_placement_table(doc)}};
    case ReportFormat::Csv:
        return {{"trace.csv", render_trace_csv(doc)},
                {"voltage_profile.csv", render_voltage_csv(doc)},
                {"plan.csv", render_plan_csv(doc)},
                {"sensitivity.csv", render_sensitivity_csv(doc)}};
    case ReportFormat::Structured: return {{"place_report.json", doc.dump(2) + "\n"}};
    }
    return {};
}

// --- power flow -------------------------------------------------------------

inline nlohmann::json solution_to_json(const PowerFlowSolution &sol, const Network &net)
{
    nlohmann::json doc;
    doc["kind"] = "power_flow";
    doc["base_mva"] = net.base_mva();
    doc["converged"] = sol.converged;
    doc["iterations"] = sol.state.iteration;
    doc["max_mismatch"] = sol.max_mismatch;
    doc["p_loss_pu"] = sol.p_loss_total;
    doc["q_loss_pu"] = sol.q_loss_total;
    doc["p_loss_mw"] = sol.p_loss_total * net.base_mva();
    doc["q_loss_mvar"] = sol.q_loss_total * net.base_mva();
    auto buses = nlohmann::json::array();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto &b = net.buses()[i];
        buses.push_back({{"bus", b.id},
                         {"kind", to_string(b.kind)},
                         {"v_mag", sol.state.v_mag[i]},
                         {"v_ang_deg", sol.state.v_ang[i] * 180.0 / std::numbers::pi},
                         {"p_inj", sol.p_inj[i]},
                         {"q_inj", sol.q_inj[i]}});
    }
    doc["buses"] = std::move(buses);
    auto branches = nlohmann::json::array();
    for (std::size_t k = 0; k < sol.branch_flows.size(); ++k) {
        const auto &br = net.branches()[k];
        const auto &fl = sol.branch_flows[k];
        branches.push_back({{"from", br.from_bus},
                            {"to", br.to_bus},
                            {"p_from", fl.s_from.real()},
                            {"q_from", fl.s_from.imag()},
                            {"p_to", fl.s_to.real()},
                            {"q_to", fl.s_to.imag()},
                            {"p_loss", fl.p_loss}});
    }
    doc["branches"] = std::move(branches);
    return doc;
}

inline std::string render_solution_table(const nlohmann::json &doc)
{
    using detail::fixed;
    using detail::num;
    using detail::pad;
    using detail::pad_right;
    std::ostringstream os;
    os << "Power flow " << (doc.at("converged").get<bool>() ? "converged" : "DID NOT CONVERGE") << " in "
       << doc.at("iterations").get<int>() << " iterations (max mismatch "
       << detail::full(num(doc.at("max_mismatch"))) << " pu)\n\n";
    os << pad_right("Bus", 6) << pad_right("Type", 7) << pad("V (pu)", 10) << pad("Angle (deg)", 13)
       << pad("P (pu)", 12) << pad("Q (pu)", 12) << '\n';
    for (const auto &b : doc.at("buses"))
        os << pad_right(std::to_string(b.at("bus").get<int>()), 6) << pad_right(b.at("kind").get<std::string>(), 7)
           << pad(fixed(num(b.at("v_mag")), 5), 10) << pad(fixed(num(b.at("v_ang_deg")), 3), 13)
           << pad(fixed(num(b.at("p_inj")), 5), 12) << pad(fixed(num(b.at("q_inj")), 5), 12) << '\n';
    const double base = num(doc.at("base_mva"));
    os << "\nTotal real loss:     " << fixed(num(doc.at("p_loss_pu")), 8) << " pu = "
       << fixed(num(doc.at("p_loss_mw")), 4) << " MW = " << fixed(num(doc.at("p_loss_pu")) * base * 1000.0, 4)
       << " kW\n";
    os << "Total reactive loss: " << fixed(num(doc.at("q_loss_pu")), 8) << " pu = "
       << fixed(num(doc.at("q_loss_mvar")), 4) << " MVar\n";
    return os.str();
}

inline std::vector<Document> emit_solution(const PowerFlowSolution &sol, const Network &net, ReportFormat format)
{
    const nlohmann::json doc = solution_to_json(sol, net);
    switch (format) {
    case ReportFormat::Table: return {{"solve_report.txt", render_solution_table(doc)}};
    case ReportFormat::Csv: {
        std::ostringstream buses, branches;
        buses << "bus,kind,v_mag,v_ang_deg,p_inj,q_inj\n";
        for (const auto &b : doc.at("buses"))
            buses << b.at("bus").get<int>() << ',' << b.at("kind").get<std::string>() << ','
                  << detail::full(detail::num(b.at("v_mag"))) << ',' << detail::full(detail::num(b.at("v_ang_deg")))
                  << ',' << detail::full(detail::num(b.at("p_inj"))) << ','
                  << detail::full(detail::num(b.at("q_inj"))) << '\n';
        branches << "from,to,p_from,q_from,p_to,q_to,p_loss\n";
        for (const auto &b : doc.at("branches"))
            branches << b.at("from").get<int>() << ',' << b.at("to").get<int>() << ','
                     << detail::full(detail::num(b.at("p_from"))) << ',' << detail::full(detail::num(b.at("q_from")))
                     << ',' << detail::full(detail::num(b.at("p_to"))) << ','
                     << detail::full(detail::num(b.at("q_to"))) << ',' << detail::full(detail::num(b.at("p_loss")))
                     << '\n';
        return {{"bus_voltages.csv", buses.str()}, {"branch_flows.csv", branches.str()}};
    }
    case ReportFormat::Structured: return {{"solve_report.json", doc.dump(2) + "\n"}};
    }
    return {};
}

// --- sensitivity ------------------------------------------------------------

inline nlohmann::json sensitivity_to_json(const std::vector<LossSensitivityRecord> &records,
                                          const CandidateSet &candidates, bool screen_relaxed)
{
    return {{"kind", "sensitivity"},
            {"sensitivity", detail::records_json(records)},
            {"candidates", detail::candidates_json(candidates)},
            {"voltage_screen_relaxed", screen_relaxed}};
}

inline std::string render_sensitivity_table(const nlohmann::json &doc)
{
    using detail::fixed;
    using detail::num;
    using detail::pad;
    std::ostringstream os;
    os << "Loss sensitivity factors\n";
    os << pad("From", 6) << pad("To", 6) << pad("LSF", 14) << pad("End Bus", 9) << pad("Bus Voltage", 13)
       << pad("Norm", 10) << '\n';
    for (const auto &r : doc.at("sensitivity"))
        os << pad(std::to_string(r.at("from").get<int>()), 6) << pad(std::to_string(r.at("to").get<int>()), 6)
           << pad(fixed(num(r.at("lsf")), 8), 14) << pad(std::to_string(r.at("end_bus").get<int>()), 9)
           << pad(fixed(num(r.at("bus_voltage")), 4), 13) << pad(fixed(num(r.at("norm")), 5), 10) << '\n';
    os << "\nCandidate buses:";
    if (doc.at("candidates").empty())
        os << " none";
    for (const auto &c : doc.at("candidates"))
        os << ' ' << c.at("bus").get<int>() << " (" << fixed(num(c.at("score")), 6) << ")";
    if (doc.at("voltage_screen_relaxed").get<bool>())
        os << " [voltage screen relaxed]";
    os << '\n';
    return os.str();
}

inline std::vector<Document> emit_sensitivity(const std::vector<LossSensitivityRecord> &records,
                                              const CandidateSet &candidates, bool screen_relaxed,
                                              ReportFormat format)
{
    const nlohmann::json doc = sensitivity_to_json(records, candidates, screen_relaxed);
    switch (format) {
    case ReportFormat::Table: return {{"sensitivity_report.txt", render_sensitivity_table(doc)}};
    case ReportFormat::Csv: return {{"sensitivity.csv", render_sensitivity_csv(doc)}};
    case ReportFormat::Structured: return {{"sensitivity_report.json", doc.dump(2) + "\n"}};
    }
    return {};
}

/// Write documents under `dir`, creating it if needed.
inline void write_documents(const std::filesystem::path &dir, const std::vector<Document> &docs)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    for (const auto &d : docs) {
        const auto path = dir / d.name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out || !(out << d.content) || !out.flush())
            throw IoError("cannot write '" + path.string() + "'");
    }
}

} // namespace capplan
