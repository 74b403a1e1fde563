#include "capplan/io.hpp"
#include "capplan/placement.hpp"
#include "capplan/report.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

using namespace capplan;
using capplan::testing::data_path;

namespace {

std::size_t count_lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const PlacementResult &ieee14_result()
{
    static const PlacementResult r = [] {
        const Network net = load_network(data_path("ieee14.cdf"));
        return run_placement(net, {168.0, 0.5}, {}, pso::PsoParams{}, {});
    }();
    return r;
}

} // namespace

TEST(ReportFormat, FromString)
{
    EXPECT_EQ(report_format_from_string("table"), ReportFormat::Table);
    EXPECT_EQ(report_format_from_string("csv"), ReportFormat::Csv);
    EXPECT_EQ(report_format_from_string("structured"), ReportFormat::Structured);
    EXPECT_THROW(report_format_from_string("xml"), ValidationError);
}

TEST(PlacementReport, TableSurvivesStructuredRoundTrip)
{
    const Network net = load_network(data_path("ieee14.cdf"));
    const auto doc = placement_to_json(ieee14_result(), net);
    const auto reread = nlohmann::json::parse(doc.dump());
    EXPECT_EQ(render_placement_table(doc), render_placement_table(reread));
    EXPECT_EQ(render_trace_csv(doc), render_trace_csv(reread));
    EXPECT_EQ(render_voltage_csv(doc), render_voltage_csv(reread));
}

TEST(PlacementReport, TraceHasOneRowPerIteration)
{
    const Network net = load_network(data_path("ieee14.cdf"));
    const auto csv = render_trace_csv(placement_to_json(ieee14_result(), net));
    EXPECT_EQ(count_lines(csv), 1u + 40u);
    EXPECT_EQ(csv.rfind("iteration,gbest_cost\n1,", 0), 0u);
}

TEST(PlacementReport, VoltageProfileCoversEveryBus)
{
    const Network net = load_network(data_path("ieee14.cdf"));
    const auto csv = render_voltage_csv(placement_to_json(ieee14_result(), net));
    EXPECT_EQ(count_lines(csv), 1u + 14u);
}

TEST(PlacementReport, EmptyPlanHasNoRowsAndZeroTotal)
{
    Bus slack;
    slack.id = 1;
    slack.kind = BusKind::Slack;
    Bus b;
    b.id = 2;
    const Network net(100.0, {slack, b}, {{1, 2, 0.0, 0.1}});
    const auto r = run_placement(net, {}, {}, pso::PsoParams{}, {});
    const auto doc = placement_to_json(r, net);
    EXPECT_TRUE(doc.at("plan").empty());
    EXPECT_DOUBLE_EQ(doc.at("total_mvar").get<double>(), 0.0);
    EXPECT_EQ(count_lines(render_plan_csv(doc)), 1u);
    EXPECT_NE(render_placement_table(doc).find("Candidate buses: none"), std::string::npos);
}

TEST(PlacementReport, EmitProducesNamedDocuments)
{
    const Network net = load_network(data_path("ieee14.cdf"));
    const auto &r = ieee14_result();
    EXPECT_EQ(emit_report(r, net, ReportFormat::Table).at(0).name, "place_report.txt");
    EXPECT_EQ(emit_report(r, net, ReportFormat::Csv).size(), 4u);
    const auto structured = emit_report(r, net, ReportFormat::Structured, {{"note", "x"}});
    const auto doc = nlohmann::json::parse(structured.at(0).content);
    EXPECT_EQ(doc.at("note"), "x");
    EXPECT_EQ(doc.at("kind"), "placement");
    EXPECT_EQ(doc.at("trace").size(), 40u);
}

TEST(SolutionReport, TablesAndCsv)
{
    const Network net = load_network(data_path("two_bus.cdf"));
    const auto sol = solve(net);
    const auto csv = emit_solution(sol, net, ReportFormat::Csv);
    ASSERT_EQ(csv.size(), 2u);
    EXPECT_EQ(csv[0].name, "bus_voltages.csv");
    EXPECT_EQ(count_lines(csv[0].content), 3u);
    EXPECT_EQ(count_lines(csv[1].content), 2u);
    const auto doc = solution_to_json(sol, net);
    EXPECT_EQ(render_solution_table(doc), render_solution_table(nlohmann::json::parse(doc.dump())));
}

TEST(SensitivityReport, CsvHeaderAndRows)
{
    const Network net = load_network(data_path("ieee14.cdf"));
    const auto recs = loss_sensitivity(solve(net), net);
    const auto docs = emit_sensitivity(recs, CandidateSet{}, false, ReportFormat::Csv);
    ASSERT_EQ(docs.size(), 1u);
    EXPECT_EQ(docs[0].content.rfind("From,To,LSF,End Bus,Bus Voltage,Norm\n", 0), 0u);
    EXPECT_EQ(count_lines(docs[0].content), 1u + 20u);
}

TEST(WriteDocuments, CreatesDirectoryAndFiles)
{
    const auto dir = std::filesystem::temp_directory_path() / "capplan_report_test";
    std::filesystem::remove_all(dir);
    write_documents(dir / "nested", {{"a.txt", "hello\n"}});
    EXPECT_TRUE(std::filesystem::exists(dir / "nested" / "a.txt"));
    EXPECT_EQ(read_file((dir / "nested" / "a.txt").string()), "hello\n");
    std::filesystem::remove_all(dir);
}
