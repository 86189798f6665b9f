#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "comove/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace comove;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome run(const fs::path& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(COMOVE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::map<std::string, std::string> key_values(const fs::path& p) {
    std::map<std::string, std::string> kv;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        const auto c = line.find(',');
        if (c != std::string::npos) kv[line.substr(0, c)] = line.substr(c + 1);
    }
    return kv;
}

nlohmann::json meta(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// 2008-like market: a year of daily counts drawn from U = D = 1.24.
void write_critical_year(const fs::path& dir) {
    Rng rng = make_stream(2008, 0);
    const auto series = comove::testing::iid_series({600, 1.24, 1.24, 0.0}, 253, rng, Date(2008, 1, 2));
    std::ofstream f(dir / "fractions.csv");
    pipeline::write_fractions_csv(f, series);
    std::vector<ReturnRecord> recs;
    for (const auto& e : series.entries())
        for (int i = 0; i < e.n_day; ++i)
            recs.push_back({e.date, "T" + std::to_string(i), i < e.k_up ? 0.01 : -0.01});
    std::ofstream r(dir / "returns.csv");
    pipeline::write_returns_csv(r, recs);
}

}  // namespace

TEST(Cli, MissingInputIsAValidationFailureNamingThePath) {
    const auto dir = comove::testing::scratch_dir("cli_missing");
    const auto r = run(dir, "--output-dir " + dir.string() + " fit --input /nonexistent/returns.csv");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("/nonexistent/returns.csv"), std::string::npos);
    const auto m = meta(dir / "fit.meta.json");
    EXPECT_EQ(m["status"], "error");
    EXPECT_EQ(m["exit_code"], 2);
    EXPECT_TRUE(m["inputs"][0]["sha256"].is_null());
}

TEST(Cli, UnknownFlagAndBadChoiceExitTwo) {
    const auto dir = comove::testing::scratch_dir("cli_flags");
    EXPECT_EQ(run(dir, "fit --bogus 1").code, 2);
    EXPECT_EQ(run(dir, "indicator --input x --step hourly").code, 2);
    EXPECT_EQ(run(dir, "--help").code, 0);
}

TEST(Cli, FitRecoversCriticalYearAndInputFormsAgree) {
    const auto dir = comove::testing::scratch_dir("cli_fit");
    write_critical_year(dir);
    const auto a = dir / "a", b = dir / "b";
    ASSERT_EQ(run(dir, "--output-dir " + a.string() + " fit --input " + (dir / "fractions.csv").string() + " --n-boot 300 --min-stocks 100").code, 0);
    ASSERT_EQ(run(dir, "--output-dir " + b.string() + " fit --input " + (dir / "returns.csv").string() + " --n-boot 300 --min-stocks 100").code, 0);
    for (const char* f : {"fit.csv", "gof.csv", "density.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const auto kv = key_values(a / "fit.csv");
    const double u = std::stod(kv.at("u_eq_d")), se = std::stod(kv.at("stderr"));
    EXPECT_NEAR(u, 1.24, 2 * se);
    EXPECT_EQ(kv.at("n_days"), "253");
    const auto m = meta(a / "fit.meta.json");
    EXPECT_EQ(m["status"], "ok");
    EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
    EXPECT_EQ(m["parameters"]["sigma"], 0.06);
    EXPECT_EQ(m["parameters"]["min-stocks"], 100);
}

TEST(Cli, EmptyWindowExitsTwo) {
    const auto dir = comove::testing::scratch_dir("cli_empty");
    write_critical_year(dir);
    const auto r = run(dir, "--output-dir " + dir.string() + " fit --input " + (dir / "fractions.csv").string() +
                                " --min-stocks 100 --window-start 1990-01-01 --window-end 1990-06-01");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, SimulateReportsTotalVariationAndIsDeterministic) {
    const auto dir = comove::testing::scratch_dir("cli_sim");
    const std::string args = "--output-dir " + dir.string() + " --seed 5 simulate --n-nodes 10 --u 2 --d 2 --samples 1000000";
    ASSERT_EQ(run(dir, args).code, 0);
    const auto kv = key_values(dir / "simulate_report.csv");
    EXPECT_LT(std::stod(kv.at("tv_exact")), 0.01);
    const auto first = slurp(dir / "histogram.csv") + slurp(dir / "simulate_report.csv") + slurp(dir / "simulate.meta.json");
    ASSERT_EQ(run(dir, args).code, 0);
    EXPECT_EQ(first, slurp(dir / "histogram.csv") + slurp(dir / "simulate_report.csv") + slurp(dir / "simulate.meta.json"));
}

TEST(Cli, SimulateRejectsBadTopology) {
    const auto dir = comove::testing::scratch_dir("cli_topo");
    EXPECT_EQ(run(dir, "--output-dir " + dir.string() + " simulate --topology regular --n-nodes 101 --degree 3").code, 2);
    std::ofstream(dir / "loop.txt") << "0 1\n1 1\n";
    const auto r = run(dir, "--output-dir " + dir.string() + " simulate --topology edges --n-nodes 0 --edges " + (dir / "loop.txt").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(":2:"), std::string::npos);
}

TEST(Cli, DetectEvaluatesSuppliedWindowsAgainstReferenceCrashes) {
    const auto dir = comove::testing::scratch_dir("cli_detect");
    std::ofstream(dir / "windows.in.csv") << "start,end,trigger_date,trigger_value\n"
                                             "1987-04-01,1988-04-01,1987-04-01,\n"
                                             "1997-03-03,1998-03-03,1997-03-03,\n"
                                             "2001-01-16,2002-01-16,2001-01-16,\n"
                                             "2008-03-03,2009-03-03,2008-03-03,\n";
    const auto r = run(dir, "--output-dir " + dir.string() + " detect --windows " + (dir / "windows.in.csv").string() +
                                " --reference-crashes --period-start 1985-01-01 --period-end 2011-01-01 --n-trials 100000");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = slurp(dir / "events.csv");
    EXPECT_NE(report.find("# hits=8,crashes=8"), std::string::npos);
    EXPECT_NE(report.find("# p_value="), std::string::npos);
    const auto m = meta(dir / "detect.meta.json");
    EXPECT_EQ(m["summary"]["hits"], 8);
    EXPECT_LT(m["summary"]["p_value"].get<double>(), 0.001);
    // Without an indicator the study period must be explicit.
    EXPECT_EQ(run(dir, "--output-dir " + dir.string() + " detect --windows " + (dir / "windows.in.csv").string() + " --reference-crashes").code, 2);
}

TEST(Cli, SyntheticChainIsDeterministicAndReplayable) {
    const auto dir = comove::testing::scratch_dir("cli_chain");
    std::ofstream(dir / "schedule.csv") << "start,end,u,d\n2000-01-03,2003-01-01,6,6\n2003-01-01,2005-01-01,1,1\n";
    const std::string out = "--output-dir " + dir.string() + " --seed 9 ";
    const std::vector<std::string> steps = {
        out + "gen-synth --schedule " + (dir / "schedule.csv").string() + " --n-stocks 200",
        out + "indicator --input " + (dir / "returns.csv").string() + " --min-stocks 100 --step monthly --n-boot 100",
        out + "detect --input " + (dir / "indicator.csv").string() + " --reference-crashes",
        out + "export-density --input " + (dir / "returns.csv").string() + " --min-stocks 100",
        out + "validate",
    };
    const std::vector<std::string> files = {"returns.csv", "gen-synth.meta.json", "indicator.csv", "indicator.meta.json",
                                            "signal.csv", "windows.csv", "events.csv", "detect.meta.json",
                                            "density.csv", "export-density.meta.json", "validate.csv", "validate.meta.json"};
    for (const auto& s : steps) ASSERT_EQ(run(dir, s).code, 0) << s << "\n" << slurp(dir / "stderr.txt");
    std::map<std::string, std::string> first;
    for (const auto& f : files) first[f] = slurp(dir / f);
    EXPECT_FALSE(first["windows.csv"].empty());

    for (const auto& s : steps) ASSERT_EQ(run(dir, s).code, 0);
    for (const auto& f : files) EXPECT_EQ(first[f], slurp(dir / f)) << f;

    // Replaying the metadata reproduces the run byte for byte.
    fs::remove(dir / "indicator.csv");
    ASSERT_EQ(run(dir, "replay " + (dir / "indicator.meta.json").string()).code, 0);
    EXPECT_EQ(first["indicator.csv"], slurp(dir / "indicator.csv"));
    EXPECT_EQ(first["indicator.meta.json"], slurp(dir / "indicator.meta.json"));

    // Threads change scheduling only.
    ASSERT_EQ(run(dir, steps[1] + " --threads 3").code, 0);
    EXPECT_EQ(first["indicator.csv"], slurp(dir / "indicator.csv"));
}

TEST(Cli, ConfigFileSuppliesDefaultsAndFlagsOverride) {
    const auto dir = comove::testing::scratch_dir("cli_config");
    std::ofstream(dir / "run.cfg") << "# simulation defaults\nn-nodes=12\nu = 3\nd=1\nsamples=1000\nseed=4\n";
    ASSERT_EQ(run(dir, "--output-dir " + dir.string() + " --config " + (dir / "run.cfg").string() + " simulate --u 2").code, 0);
    const auto m = meta(dir / "simulate.meta.json");
    EXPECT_EQ(m["parameters"]["n-nodes"], 12);
    EXPECT_EQ(m["parameters"]["u"], 2);
    EXPECT_EQ(m["parameters"]["d"], 1);
    EXPECT_EQ(m["seed"], 4);
    EXPECT_EQ(m["inputs"].back()["option"], "config");
    std::ofstream(dir / "bad.cfg") << "no equals sign\n";
    EXPECT_EQ(run(dir, "--output-dir " + dir.string() + " --config " + (dir / "bad.cfg").string() + " simulate").code, 2);
}

TEST(Cli, ValidatePasses) {
    const auto dir = comove::testing::scratch_dir("cli_validate");
    const auto r = run(dir, "--output-dir " + dir.string() + " validate");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
