#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "elltest/ell_test.hpp"
#include "elltest/harness.hpp"

using namespace elltest;
using json = nlohmann::json;

namespace {

const std::string kGolden = std::string(ELLTEST_TEST_DATA) + "/golden.csv";

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::initializer_list<std::string> args)
{
    std::vector<std::string> store{"elltest"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : store) argv.push_back(s.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / ("elltest_cli_" + name)).string(); }

} // namespace

TEST_CASE("test subcommand: golden p-value")
{
    const Run r = cli({"test", "--data", kGolden, "--response", "y", "--index", "4", "--seed", "7"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    // recorded from the first verified build
    CHECK(j["p_value"].get<double>() == doctest::Approx(0.21233314009318605).epsilon(1e-9));
    CHECK(j["lambda_from_cv"].get<bool>());
    CHECK(j["name"] == "x4");
    // OLS fields against an independent least-squares fit
    CHECK(j["t_test"]["beta_ols"].get<double>() == doctest::Approx(0.2949411535061814).epsilon(1e-12));
    CHECK(j["t_test"]["se"].get<double>() == doctest::Approx(0.24104907452418245).epsilon(1e-12));

    // the library with the same seed gives the same answer
    const CsvData d = load_csv(kGolden, "y");
    Rng rng(7);
    const ExogenousDraw draw = draw_exogenous(40 - 6 + 1, 40, 10, rng);
    CHECK(ell_test_at(d.data, 4, 0.0, draw).p == j["p_value"].get<double>());

    const Run fixed = cli({"test", "--data", kGolden, "--response", "y", "--name", "x1", "--gamma", "0.3", "--seed", "7",
                           "--lambda", "0.05"});
    REQUIRE(fixed.code == 0);
    const json jf = json::parse(fixed.out);
    CHECK(jf["p_value"].get<double>() == doctest::Approx(0.025932142356996944).epsilon(1e-9));
    CHECK_FALSE(jf["lambda_from_cv"].get<bool>());
    CHECK(jf["lambda"].get<double>() == 0.05);
}

TEST_CASE("input errors exit with status 2")
{
    CHECK(cli({"test", "--data", kGolden, "--response", "y", "--index", "0", "--bogus"}).code == 2);
    CHECK(cli({"test", "--response", "y", "--index", "0"}).code == 2);
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"test", "--data", "/nonexistent.csv", "--response", "y", "--index", "0"}).code == 2);
    CHECK(cli({"test", "--data", kGolden, "--response", "nope", "--index", "0"}).code == 2);
    CHECK(cli({"test", "--data", kGolden, "--response", "y", "--index", "6"}).code == 2);
    CHECK(cli({"test", "--data", kGolden, "--response", "y", "--index", "0", "--name", "x0"}).code == 2);
    CHECK(cli({"test", "--data", kGolden, "--response", "y"}).code == 2);
    CHECK(cli({"test", "--data", kGolden, "--response", "y", "--index", "0", "--alpha", "2"}).code == 2);
    const Run e = cli({"test", "--data", kGolden, "--response", "y", "--name", "x9"});
    CHECK(e.code == 2);
    CHECK(e.err.find("x9") != std::string::npos);
    CHECK(cli({"post-test", "--data", kGolden, "--response", "y", "--index", "1", "--lambda-s", "100"}).code == 2);
    CHECK(cli({"power-theory", "--kappa", "0.5", "--sigma", "1", "--lambda", "1", "--prior", "weird:1", "--h-grid", "1"})
              .code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("interval subcommands")
{
    const Run r = cli({"ci", "--data", kGolden, "--response", "y", "--index", "2", "--grid-points", "60"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["ell"]["lower"].get<double>() < j["ell"]["upper"].get<double>());
    CHECK(j["t"]["lower"].get<double>() < -1.2);
    CHECK(j["ell"]["alpha"].get<double>() == 0.05);

    const Run p = cli({"post-test", "--data", kGolden, "--response", "y", "--index", "2", "--lambda-s", "0.05"});
    REQUIRE(p.code == 0);
    const double pv = json::parse(p.out)["p_value"].get<double>();
    CHECK(pv >= 0.0);
    CHECK(pv <= 1.0);

    const Run pc = cli({"post-ci", "--data", kGolden, "--response", "y", "--index", "2", "--lambda-s", "0.05",
                        "--grid-points", "40"});
    REQUIRE(pc.code == 0);
    CHECK(json::parse(pc.out)["interval"]["method"] == "conditional");
}

TEST_CASE("simulate subcommand")
{
    const std::string cfg = temp_path("sim.cfg");
    std::ofstream(cfg) << "kind = power\nn = 40\nd = 10\nk = 3\namplitude = 2\nreplicates = 10\nseed = 5\n";
    const Run r = cli({"simulate", "--config", cfg});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("scenario,method,metric,value,se,count\n", 0) == 0);
    CHECK(r.out.find(",ell,power,") != std::string::npos);

    const std::string out = temp_path("sim.csv");
    REQUIRE(cli({"simulate", "--config", cfg, "--out", out}).code == 0);
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == r.out);

    std::ofstream(cfg) << "kind = power\nwhatever = 1\n";
    CHECK(cli({"simulate", "--config", cfg}).code == 2);
}

TEST_CASE("power-theory and asymptotic-test subcommands")
{
    const Run r = cli({"power-theory", "--kappa", "0.5", "--sigma", "1", "--lambda", "1", "--prior", "sparse:0.9",
                       "--h-grid", "0,3", "--draws", "20000"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j["results"].size() == 2);
    for (const auto& row : j["results"])
        for (const char* t : {"recentered", "z_two", "z_one"}) {
            CHECK(row[t]["power"].get<double>() >= 0.0);
            CHECK(row[t]["power"].get<double>() <= 1.0);
        }
    CHECK(j["results"][1]["z_one"]["power"].get<double>() > j["results"][0]["z_one"]["power"].get<double>());
    CHECK(cli({"power-theory", "--kappa", "1", "--sigma", "1", "--lambda", "1", "--prior", "sparse:0.9", "--h-grid", "1"})
              .code == 2);

    const std::string theta = temp_path("theta.csv"), sigma = temp_path("sigma.csv");
    std::ofstream(theta) << "0.1,-0.2,0.05\n";
    std::ofstream(sigma) << "1,0.2,0\n0.2,1,0.1\n0,0.1,1\n";
    const Run a = cli({"asymptotic-test", "--theta-hat", theta, "--sigma-hat", sigma, "--n", "500", "--index", "1", "--folds", "3"});
    REQUIRE(a.code == 0);
    const double p = json::parse(a.out)["p_value"].get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(cli({"asymptotic-test", "--theta-hat", theta, "--sigma-hat", sigma, "--n", "500", "--index", "3"}).code == 2);
    // the pseudo-design has d rows, so ten folds cannot fit
    CHECK(cli({"asymptotic-test", "--theta-hat", theta, "--sigma-hat", sigma, "--n", "500", "--index", "1"}).code == 2);
}
