#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "elltest/amp_power.hpp"
#include "elltest/ci_inversion.hpp"
#include "elltest/cross_validation.hpp"
#include "elltest/ell_test.hpp"
#include "elltest/errors.hpp"
#include "elltest/harness.hpp"
#include "elltest/lasso.hpp"
#include "elltest/post_selection.hpp"

namespace elltest {

namespace {

using json = nlohmann::ordered_json;

// Options shared by the data-driven subcommands.
struct DataOptions {
    std::string data;
    std::string response;
    std::vector<std::string> drop;
    bool normalize = false;
    std::optional<long> index;
    std::string name;
    double gamma = 0.0;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int folds = 10;
    std::string rule = "min";
    std::optional<double> known_sigma;
    std::optional<double> lambda;
    int grid_points = 400;
};

void add_data_options(CLI::App* app, DataOptions& o, bool with_test_knobs)
{
    app->add_option("--data", o.data, "CSV file with a header row")->required();
    app->add_option("--response", o.response, "name of the response column")->required();
    app->add_option("--drop", o.drop, "columns to ignore");
    app->add_flag("--normalize", o.normalize, "scale every predictor column to unit norm");
    auto* idx = app->add_option("--index", o.index, "0-based column of X to test");
    auto* nm = app->add_option("--name", o.name, "name of the column of X to test");
    idx->excludes(nm);
    app->add_option("--alpha", o.alpha, "level")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", o.seed, "seed of the exogenous randomization");
    app->add_option("--folds", o.folds, "cross-validation folds")->check(CLI::Range(2, 1000000));
    if (with_test_knobs) {
        app->add_option("--gamma", o.gamma, "hypothesized value of beta_j");
        app->add_option("--rule", o.rule, "CV rule")->check(CLI::IsMember({"min", "1se"}));
        app->add_option("--known-sigma", o.known_sigma, "known noise level")->check(CLI::PositiveNumber);
        app->add_option("--lambda", o.lambda, "fixed LASSO penalty instead of cross-validation")
            ->check(CLI::PositiveNumber);
    }
}

struct Loaded {
    CsvData csv;
    Index j = 0;
};

Loaded load(const DataOptions& o, bool known_sigma)
{
    Loaded l{load_csv(o.data, o.response, o.drop, o.normalize, known_sigma), 0};
    if (o.index && !o.name.empty()) throw InputError("give --index or --name, not both");
    if (o.index) {
        if (*o.index < 0 || *o.index >= l.csv.data.d()) throw InputError("--index out of range");
        l.j = static_cast<Index>(*o.index);
    } else if (!o.name.empty()) {
        bool found = false;
        for (std::size_t k = 0; k < l.csv.columns.size(); ++k)
            if (l.csv.columns[k] == o.name) {
                l.j = static_cast<Index>(k);
                found = true;
            }
        if (!found) throw InputError("column '" + o.name + "' is not a predictor");
    } else {
        throw InputError("one of --index or --name is required");
    }
    return l;
}

EllTestOptions test_options(const DataOptions& o)
{
    EllTestOptions t;
    t.folds = o.folds;
    t.rule = o.rule == "1se" ? CvRule::one_se : CvRule::min;
    t.known_sigma = o.known_sigma;
    t.lambda_override = o.lambda;
    return t;
}

json number(double x)
{
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
}

json header(const Loaded& l, const DataOptions& o)
{
    return json{{"n", l.csv.data.n()},
                {"d", l.csv.data.d()},
                {"index", l.j},
                {"name", l.csv.columns[static_cast<std::size_t>(l.j)]},
                {"seed", o.seed}};
}

json interval_json(const ConfidenceInterval& ci)
{
    return json{{"method", ci.method},
                {"lower", number(ci.lower)},
                {"upper", number(ci.upper)},
                {"lower_open", ci.lower_open},
                {"upper_open", ci.upper_open},
                {"empty", ci.empty},
                {"gaps", ci.gaps},
                {"grid_resolution", ci.grid_resolution},
                {"alpha", ci.alpha}};
}

CoefPrior parse_prior(const std::string& spec, double h)
{
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    std::vector<std::string> parts;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    auto num = [](const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw InputError("bad number '" + s + "' in --prior");
            return v;
        } catch (const std::logic_error&) {
            throw InputError("bad number '" + s + "' in --prior");
        }
    };
    if (kind == "sparse" && parts.size() == 1) return CoefPrior::sparse(num(parts[0]), h);
    if (kind == "gaussian" && parts.size() == 2) return CoefPrior::gaussian(num(parts[0]), num(parts[1]));
    if (kind == "points" && !parts.empty()) {
        std::vector<double> masses, atoms;
        for (const auto& p : parts) {
            const auto at = p.find('@');
            if (at == std::string::npos) throw InputError("points prior entries look like mass@atom");
            masses.push_back(num(p.substr(0, at)));
            atoms.push_back(num(p.substr(at + 1)));
        }
        return CoefPrior::point_masses(masses, atoms);
    }
    throw InputError("--prior must be sparse:<null mass>, gaussian:<mean>,<var> or points:<m>@<a>,...");
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

void emit_table(std::ostream& out, const ResultTable& table, const std::string& path)
{
    if (path.empty())
        out << table.to_csv();
    else
        table.write_csv(path);
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"ell-test: exact LASSO-based inference in the Gaussian linear model"};
    app.require_subcommand(1);

    DataOptions test_o, ci_o, post_o, post_ci_o;
    auto* test_cmd = app.add_subcommand("test", "ell-test p-value for beta_j = gamma");
    add_data_options(test_cmd, test_o, true);

    auto* ci_cmd = app.add_subcommand("ci", "confidence interval by inverting the ell-test");
    add_data_options(ci_cmd, ci_o, true);
    ci_cmd->add_option("--grid-points", ci_o.grid_points, "grid size")->check(CLI::Range(3, 100000));

    double post_lambda_s = 0.0;
    auto* post_cmd = app.add_subcommand("post-test", "p-value conditional on the LASSO selecting column j");
    add_data_options(post_cmd, post_o, true);
    post_cmd->add_option("--lambda-s", post_lambda_s, "selection penalty")->required()->check(CLI::PositiveNumber);

    double post_ci_lambda_s = 0.0;
    bool cv_lambda_l = false;
    auto* post_ci_cmd = app.add_subcommand("post-ci", "confidence interval conditional on selection");
    add_data_options(post_ci_cmd, post_ci_o, false);
    post_ci_cmd->add_option("--lambda-s", post_ci_lambda_s, "selection penalty")->required()->check(CLI::PositiveNumber);
    post_ci_cmd->add_flag("--cv-lambda-l", cv_lambda_l, "cross-validate the test statistic's penalty per gamma");
    post_ci_cmd->add_option("--grid-points", post_ci_o.grid_points, "grid size")->check(CLI::Range(3, 100000));

    std::string config_path, sim_out;
    auto* sim_cmd = app.add_subcommand("simulate", "run a simulation scenario");
    sim_cmd->add_option("--config", config_path, "key = value scenario file")->required();
    sim_cmd->add_option("--out", sim_out, "CSV output path (default stdout)");

    double kappa = 0.5, pt_sigma = 1.0, pt_lambda = 1.0, pt_alpha = 0.05;
    std::string prior_spec = "sparse:0.9", pt_out;
    std::vector<double> h_grid{0.0, 1.0, 2.0, 3.0, 4.0};
    long draws = 1000000;
    std::uint64_t pt_seed = 1;
    auto* pt_cmd = app.add_subcommand("power-theory", "asymptotic power in the proportional regime");
    pt_cmd->add_option("--kappa", kappa, "d / n")->check(CLI::Range(0.0, 1.0));
    pt_cmd->add_option("--sigma", pt_sigma, "noise level")->check(CLI::PositiveNumber);
    pt_cmd->add_option("--lambda", pt_lambda, "penalty on the (1/2)||y - Xb||^2 scale")->check(CLI::PositiveNumber);
    pt_cmd->add_option("--prior", prior_spec, "sparse:<null mass> | gaussian:<mean>,<var> | points:<m>@<a>,...");
    pt_cmd->add_option("--h-grid", h_grid, "tested coefficient values")->delimiter(',');
    pt_cmd->add_option("--alpha", pt_alpha, "level")->check(CLI::Range(0.0, 1.0));
    pt_cmd->add_option("--draws", draws, "Monte Carlo draws")->check(CLI::Range(2L, 1000000000L));
    pt_cmd->add_option("--seed", pt_seed, "Monte Carlo seed");
    pt_cmd->add_option("--out", pt_out, "CSV output path (default JSON to stdout)");

    std::string theta_path, sigma_path;
    double asym_n = 0.0;
    long asym_index = 0;
    std::uint64_t asym_seed = 1;
    int asym_folds = 10;
    std::optional<double> asym_lambda;
    auto* asym_cmd = app.add_subcommand("asymptotic-test", "ell-test from an asymptotically normal estimate");
    asym_cmd->add_option("--theta-hat", theta_path, "CSV with the estimate (one row or one column)")->required();
    asym_cmd->add_option("--sigma-hat", sigma_path, "CSV with its d x d covariance (of sqrt(n)(theta_hat - theta))")
        ->required();
    asym_cmd->add_option("--n", asym_n, "sample size")->required()->check(CLI::PositiveNumber);
    asym_cmd->add_option("--index", asym_index, "0-based coordinate to test");
    asym_cmd->add_option("--seed", asym_seed, "seed of the exogenous randomization");
    asym_cmd->add_option("--folds", asym_folds, "cross-validation folds")->check(CLI::Range(2, 1000000));
    asym_cmd->add_option("--lambda", asym_lambda, "fixed penalty")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*test_cmd) {
            const Loaded l = load(test_o, test_o.known_sigma.has_value());
            Rng rng(test_o.seed);
            ExogenousDraw draw =
                draw_exogenous(l.csv.data.n() - l.csv.data.d() + 1, l.csv.data.n(), test_o.folds, rng);
            const EllTestResult r = EllTestContext(l.csv.data, l.j, draw, test_options(test_o)).run(test_o.gamma);
            json j = header(l, test_o);
            j["gamma"] = r.gamma;
            j["p_value"] = r.p;
            j["reject"] = r.p <= test_o.alpha;
            j["alpha"] = test_o.alpha;
            j["lambda"] = r.lambda_used;
            j["lambda_from_cv"] = r.lambda_from_cv;
            j["beta_hat_j"] = r.beta_hat_j;
            j["u1"] = r.u1;
            j["v_minus"] = r.v_minus;
            j["v_plus"] = r.v_plus;
            j["m_hat"] = r.m_hat;
            if (!test_o.known_sigma) {
                const TTestResult t = t_test(l.csv.data, l.j, test_o.gamma);
                j["t_test"] = {{"t", t.t}, {"p_two_sided", t.p_two}, {"beta_ols", t.beta_ols}, {"se", t.se}};
            }
            emit(out, j);
        } else if (*ci_cmd) {
            if (ci_o.known_sigma) throw InputError("ci supports the unknown-sigma test only");
            const Loaded l = load(ci_o, false);
            Rng rng(ci_o.seed);
            const GridSpec grid = default_grid(l.csv.data, l.j, ci_o.alpha, ci_o.grid_points);
            const ConfidenceInterval ell = ell_ci(l.csv.data, l.j, ci_o.alpha, rng, grid, test_options(ci_o));
            json j = header(l, ci_o);
            j["ell"] = interval_json(ell);
            j["t"] = interval_json(t_ci(l.csv.data, l.j, ci_o.alpha));
            emit(out, j);
        } else if (*post_cmd) {
            if (post_o.known_sigma) throw InputError("post-test supports the unknown-sigma test only");
            const Loaded l = load(post_o, false);
            const double lambda_l = post_o.lambda.value_or(post_lambda_s);
            const double p = conditional_p_general(l.csv.data, l.j, post_o.gamma, lambda_l, post_lambda_s);
            json j = header(l, post_o);
            j["gamma"] = post_o.gamma;
            j["lambda_s"] = post_lambda_s;
            j["lambda_l"] = lambda_l;
            j["p_value"] = p;
            j["reject"] = p <= post_o.alpha;
            j["alpha"] = post_o.alpha;
            emit(out, j);
        } else if (*post_ci_cmd) {
            const Loaded l = load(post_ci_o, false);
            Rng rng(post_ci_o.seed);
            const GridSpec grid = default_grid(l.csv.data, l.j, post_ci_o.alpha, post_ci_o.grid_points);
            const ConfidenceInterval ci = conditional_ci(l.csv.data, l.j, post_ci_lambda_s, post_ci_o.alpha,
                                                         cv_lambda_l, rng, grid, post_ci_o.folds);
            json j = header(l, post_ci_o);
            j["lambda_s"] = post_ci_lambda_s;
            j["interval"] = interval_json(ci);
            emit(out, j);
        } else if (*sim_cmd) {
            emit_table(out, run_scenario(load_config(config_path)), sim_out);
        } else if (*pt_cmd) {
            if (!(kappa > 0.0 && kappa < 1.0)) throw InputError("--kappa must lie in (0, 1)");
            ResultTable table;
            json rows = json::array();
            const PowerTest tests[3] = {PowerTest::recentered, PowerTest::z_two, PowerTest::z_one};
            const char* names[3] = {"recentered", "z_two", "z_one"};
            for (double h : h_grid) {
                const StateEvolutionSolution se = state_evolution(kappa, pt_sigma, pt_lambda, parse_prior(prior_spec, h));
                const FGDistribution fg = fg_distribution(h, se);
                std::ostringstream sc;
                sc << "kappa=" << format_double(kappa) << ";sigma=" << format_double(pt_sigma)
                   << ";lambda=" << format_double(pt_lambda) << ";prior=" << prior_spec << ";h=" << format_double(h);
                json row{{"h", h}, {"alpha_lambda", se.alpha}, {"tau_lambda", se.tau}};
                for (int t = 0; t < 3; ++t) {
                    const PowerEstimate pe = asymptotic_power(tests[t], pt_alpha, fg, draws, pt_seed);
                    table.add({sc.str(), names[t], "power", pe.power, pe.se, draws});
                    row[names[t]] = {{"power", pe.power}, {"se", pe.se}};
                }
                rows.push_back(row);
            }
            if (pt_out.empty())
                emit(out, json{{"kappa", kappa}, {"sigma", pt_sigma}, {"lambda", pt_lambda}, {"prior", prior_spec},
                               {"alpha", pt_alpha}, {"results", rows}});
            else
                table.write_csv(pt_out);
        } else if (*asym_cmd) {
            MatrixXd theta = load_matrix_csv(theta_path);
            if (theta.rows() != 1 && theta.cols() != 1) throw InputError("--theta-hat must hold one row or one column");
            AsymptoticInput in;
            in.theta_hat = theta.reshaped();
            in.sigma_hat = load_matrix_csv(sigma_path);
            in.n = asym_n;
            if (asym_index < 0 || asym_index >= in.theta_hat.size()) throw InputError("--index out of range");
            Rng rng(asym_seed);
            const EllTestResult r = asymptotic_ell_test(in, static_cast<Index>(asym_index), rng, asym_folds, asym_lambda);
            emit(out, json{{"d", in.theta_hat.size()},
                           {"index", asym_index},
                           {"seed", asym_seed},
                           {"p_value", r.p},
                           {"lambda", r.lambda_used},
                           {"beta_hat_j", r.beta_hat_j},
                           {"u1", r.u1}});
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

} // namespace elltest
