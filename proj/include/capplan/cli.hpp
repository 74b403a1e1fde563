#pragma once

// Command-line front end: `solve`, `sensitivity` and `place` subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation/I-O error,
// 3 power flow did not converge.

#include "capplan/config.hpp"
#include "capplan/errors.hpp"
#include "capplan/io.hpp"
#include "capplan/placement.hpp"
#include "capplan/power_flow.hpp"
#include "capplan/report.hpp"
#include "capplan/sensitivity.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace capplan {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNoConvergence = 3 };

/// Verbosity from CAPPLAN_LOG: quiet, warn (default), info, debug.
class Log
{
public:
    enum Level { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

    explicit Log(std::ostream &sink) : sink_(sink)
    {
        if (const char *env = std::getenv("CAPPLAN_LOG")) {
            const std::string v = env;
            if (v == "quiet") level_ = Quiet;
            else if (v == "info") level_ = Info;
            else if (v == "debug") level_ = Debug;
        }
    }
    void warn(const std::string &m) const { emit(Warn, "warning", m); }
    void info(const std::string &m) const { emit(Info, "info", m); }
    void debug(const std::string &m) const { emit(Debug, "debug", m); }

private:
    void emit(Level l, const char *tag, const std::string &m) const
    {
        if (level_ >= l)
            sink_ << "capplan: " << tag << ": " << m << '\n';
    }
    std::ostream &sink_;
    Level level_ = Warn;
};

namespace detail {

struct CliOptions
{
    std::string network;
    std::string config = "default";
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::vector<std::string> formats;
};

inline void add_common_options(CLI::App *cmd, CliOptions &o)
{
    cmd->add_option("--network", o.network, "network file (IEEE Common Data Format)")->required();
    cmd->add_option("--config", o.config, "JSON config file, or 'default'");
    cmd->add_option("--out", o.out_dir, "write report files to this directory");
    cmd->add_option("--format", o.formats, "table|csv|structured (repeatable)")
        ->check(CLI::IsMember({"table", "csv", "structured"}));
}

inline void publish(const std::vector<Document> &docs, const CliOptions &o, std::ostream &out)
{
    if (!o.out_dir.empty()) {
        write_documents(o.out_dir, docs);
        for (const auto &d : docs)
            out << "wrote " << (std::filesystem::path(o.out_dir) / d.name).string() << '\n';
        return;
    }
    for (const auto &d : docs) {
        if (docs.size() > 1)
            out << "==> " << d.name << " <==\n";
        out << d.content;
    }
}

inline std::vector<ReportFormat> formats_of(const CliOptions &o, const RunConfig &cfg)
{
    if (o.formats.empty())
        return cfg.formats;
    std::vector<ReportFormat> f;
    for (const auto &s : o.formats) {
        auto v = report_format_from_string(s);
        if (std::find(f.begin(), f.end(), v) == f.end())
            f.push_back(v);
    }
    return f;
}

} // namespace detail

/// Run the command line `args` (program name excluded).
inline int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    const Log log(err);
    CLI::App app{"Capacitor placement: load flow, loss sensitivity and PSO sizing", "capplan"};
    app.require_subcommand(1);
    detail::CliOptions opts;

    auto *solve_cmd = app.add_subcommand("solve", "Newton-Raphson power flow and loss summary");
    auto *sens_cmd = app.add_subcommand("sensitivity", "branch loss sensitivity factors and candidate buses");
    auto *place_cmd = app.add_subcommand("place", "size capacitors at the most sensitive buses with PSO");
    for (auto *cmd : {solve_cmd, sens_cmd, place_cmd})
        detail::add_common_options(cmd, opts);
    place_cmd->add_option("--seed", opts.seed, "PSO random seed (overrides the config)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, err, err);
        err << app.help();
        return kExitUsage;
    }

    try {
        RunConfig cfg = load_config(opts.config);
        if (opts.seed)
            cfg.pso.seed = *opts.seed;
        cfg.network_path = opts.network;
        cfg.output_dir = opts.out_dir;
        cfg.formats = detail::formats_of(opts, cfg);
        cfg.validate();

        const Network net = load_network(cfg.network_path).with_voltage_limits(cfg.v_min, cfg.v_max);
        log.info("loaded " + std::to_string(net.size()) + " buses, " + std::to_string(net.branches().size()) +
                 " branches from " + cfg.network_path);

        if (solve_cmd->parsed()) {
            const PowerFlowSolution sol = solve(net, cfg.solver);
            log.debug("power flow finished after " + std::to_string(sol.state.iteration) + " iterations");
            std::vector<Document> docs;
            for (auto f : cfg.formats)
                for (auto &d : emit_solution(sol, net, f))
                    docs.push_back(std::move(d));
            detail::publish(docs, opts, out);
            if (!sol.converged) {
                log.warn("power flow did not converge");
                return kExitNoConvergence;
            }
            return kExitOk;
        }

        if (sens_cmd->parsed()) {
            const PowerFlowSolution sol = solve(net, cfg.solver);
            if (!sol.converged) {
                err << "capplan: power flow did not converge\n";
                return kExitNoConvergence;
            }
            const auto records = loss_sensitivity(sol, net);
            auto candidates = select_candidates(records, net, cfg.sensitivity);
            bool relaxed = false;
            if (candidates.empty()) {
                auto loose = cfg.sensitivity;
                loose.norm_threshold = std::numeric_limits<double>::infinity();
                candidates = select_candidates(records, net, loose);
                relaxed = true;
                log.warn("no bus passes the voltage screen; ranking by sensitivity alone");
            }
            std::vector<Document> docs;
            for (auto f : cfg.formats)
                for (auto &d : emit_sensitivity(records, candidates, relaxed, f))
                    docs.push_back(std::move(d));
            detail::publish(docs, opts, out);
            return kExitOk;
        }

        const PlacementResult result =
            run_placement(net, cfg.tariffs, cfg.sensitivity, cfg.pso, cfg.solver, cfg.placement);
        for (const auto &d : result.diagnostics)
            log.warn(d);
        log.info("PSO used " + std::to_string(result.evaluations) + " fitness evaluations");
        const nlohmann::json extra = {{"config", to_json(cfg)}};
        std::vector<Document> docs;
        for (auto f : cfg.formats)
            for (auto &d : emit_report(result, net, f, extra))
                docs.push_back(std::move(d));
        detail::publish(docs, opts, out);
        return kExitOk;
    } catch (const ConvergenceError &e) {
        err << "capplan: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const SolverError &e) {
        err << "capplan: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const ParseError &e) {
        err << "capplan: " << opts.network << ": " << e.what() << '\n';
        return kExitData;
    } catch (const ValidationError &e) {
        err << "capplan: " << e.what() << '\n';
        return kExitData;
    } catch (const IoError &e) {
        err << "capplan: " << e.what() << '\n';
        return kExitData;
    }
}

} // namespace capplan
