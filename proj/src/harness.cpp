#include "elltest/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "elltest/amp_power.hpp"
#include "elltest/ci_inversion.hpp"
#include "elltest/ell_dist.hpp"
#include "elltest/ell_test.hpp"
#include "elltest/errors.hpp"
#include "elltest/lasso.hpp"
#include "elltest/model_core.hpp"
#include "elltest/parallel.hpp"
#include "elltest/post_selection.hpp"
#include "elltest/special_fn.hpp"

namespace elltest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& what)
{
    const std::string t = trim(text);
    if (t.empty()) throw InputError(what + ": empty value");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) throw InputError(what + ": not a number: '" + t + "'");
    return v;
}

long parse_integer(const std::string& text, const std::string& what)
{
    const double v = parse_number(text, what);
    if (v != std::floor(v) || std::fabs(v) > 9.0e15) throw InputError(what + ": not an integer: '" + trim(text) + "'");
    return static_cast<long>(v);
}

bool parse_bool(const std::string& text, const std::string& what)
{
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw InputError(what + ": expected true/false, got '" + t + "'");
}

std::vector<double> parse_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, what));
    return out;
}

const char* kind_name(ScenarioKind k)
{
    switch (k) {
    case ScenarioKind::power: return "power";
    case ScenarioKind::ci: return "ci";
    case ScenarioKind::conditional_ci: return "conditional_ci";
    case ScenarioKind::robustness: return "robustness";
    case ScenarioKind::lambda_variability: return "lambda_variability";
    case ScenarioKind::amp_validation: return "amp_validation";
    }
    return "?";
}

const char* error_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::gaussian: return "gaussian";
    case ErrorKind::t: return "t";
    case ErrorKind::gamma: return "gamma";
    case ErrorKind::heteroskedastic: return "heteroskedastic";
    case ErrorKind::nonlinear: return "nonlinear";
    }
    return "?";
}

// Power used by the nonlinear model: x^delta for integer delta, otherwise
// the sign-preserving sign(x)|x|^delta.
double model_power(double x, double delta)
{
    if (delta == std::floor(delta)) return std::pow(x, delta);
    return std::copysign(std::pow(std::fabs(x), delta), x);
}

// Rows i.i.d. N(0, Toeplitz(rho)) via the AR(1) recursion.
MatrixXd toeplitz_rows(Index n, Index d, double rho, Rng& rng)
{
    MatrixXd X(n, d);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (Index i = 0; i < n; ++i) {
        double prev = rng.normal();
        X(i, 0) = prev;
        for (Index k = 1; k < d; ++k) {
            prev = rho * prev + innov * rng.normal();
            X(i, k) = prev;
        }
    }
    return X;
}

// Streams: data of replicate r use substream 2r, methods use 2r + 1.
Rng data_stream(const ScenarioConfig& c, std::uint64_t r) { return Rng::substream(c.seed, 2 * r); }
Rng method_stream(const ScenarioConfig& c, std::uint64_t r) { return Rng::substream(c.seed, 2 * r + 1); }

EllTestOptions test_options(const ScenarioConfig& c)
{
    EllTestOptions o;
    o.folds = c.folds;
    o.rule = c.rule;
    return o;
}

double indicator(bool b) { return b ? 1.0 : 0.0; }

using ReplicateFn = std::function<std::vector<double>(std::uint64_t)>;

std::vector<std::vector<double>> run_replicates(long count, const ReplicateFn& fn)
{
    std::vector<std::vector<double>> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t r) {
        try {
            out[r] = fn(r);
        } catch (const InputError& e) {
            throw InputError("replicate " + std::to_string(r) + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("replicate " + std::to_string(r) + ": " + e.what());
        } catch (const std::exception& e) {
            throw NumericalError("replicate " + std::to_string(r) + ": " + e.what());
        }
    });
    return out;
}

std::vector<double> column(const std::vector<std::vector<double>>& reps, std::size_t slot)
{
    std::vector<double> v;
    v.reserve(reps.size());
    for (const auto& r : reps) v.push_back(r.at(slot));
    return v;
}

void add_summary(ResultTable& table, const std::vector<double>& values, const std::string& scenario,
                 const std::string& method, const std::string& metric)
{
    ResultRow row = summarize(values, scenario, method, metric);
    if (row.count > 0) table.add(std::move(row));
}

// Ratio of means a/b with a delta-method standard error.
void add_ratio(ResultTable& table, const std::vector<double>& a, const std::vector<double>& b,
               const std::string& scenario, const std::string& method, const std::string& metric)
{
    std::vector<double> aa, bb;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::isfinite(a[i]) && std::isfinite(b[i])) {
            aa.push_back(a[i]);
            bb.push_back(b[i]);
        }
    const auto m = static_cast<double>(aa.size());
    if (aa.size() < 2) return;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < aa.size(); ++i) {
        ma += aa[i];
        mb += bb[i];
    }
    ma /= m;
    mb /= m;
    if (mb == 0.0) return;
    const double ratio = ma / mb;
    double ss = 0.0;
    for (std::size_t i = 0; i < aa.size(); ++i) {
        const double z = aa[i] - ratio * bb[i];
        ss += z * z;
    }
    const double se = std::sqrt(ss / (m - 1.0)) / (std::sqrt(m) * std::fabs(mb));
    table.add({scenario, method, metric, ratio, se, static_cast<long>(aa.size())});
}

ResultTable run_power(const ScenarioConfig& c, bool size_only)
{
    const std::string sc = c.describe();
    const auto reps = run_replicates(c.replicates, [&](std::uint64_t r) {
        const Scenario s = generate_scenario(c, r);
        Rng rng = method_stream(c, r);
        const EllTestResult ell = ell_test(s.data, s.truth.j, rng, test_options(c));
        const TTestResult tt = t_test(s.data, s.truth.j);
        const double bj = s.truth.beta[s.truth.j];
        double one = kNaN;
        if (bj != 0.0) one = indicator((bj > 0 ? tt.p_one_pos : tt.p_one_neg) <= c.alpha);
        return std::vector<double>{indicator(ell.p <= c.alpha), indicator(tt.p_two <= c.alpha), one,
                                   ell.lambda_used, ell.p};
    });
    ResultTable table;
    const std::string metric = size_only ? "size" : "power";
    add_summary(table, column(reps, 0), sc, "ell", metric);
    add_summary(table, column(reps, 1), sc, "t_two", metric);
    if (!size_only) add_summary(table, column(reps, 2), sc, "t_one", metric);
    add_summary(table, column(reps, 3), sc, "ell", "lambda");
    add_summary(table, column(reps, 4), sc, "ell", "mean_p");
    return table;
}

ResultTable run_ci(const ScenarioConfig& c)
{
    const std::string sc = c.describe();
    const auto reps = run_replicates(c.replicates, [&](std::uint64_t r) {
        const Scenario s = generate_scenario(c, r);
        Rng rng = method_stream(c, r);
        const Index j = s.truth.j;
        const double bj = s.truth.beta[j];
        const GridSpec grid = default_grid(s.data, j, c.alpha, c.grid_points);
        const ConfidenceInterval ell = ell_ci(s.data, j, c.alpha, rng, grid, test_options(c));
        const ConfidenceInterval t = t_ci(s.data, j, c.alpha);
        std::vector<double> out{indicator(ell.contains(bj)), ell.length(), indicator(t.contains(bj)), t.length(),
                                kNaN, indicator(ell.empty), indicator(ell.gaps)};
        if (bj != 0.0) out[4] = indicator(oracle_one_sided_ci(s.data, j, c.alpha, bj).contains(bj));
        return out;
    });
    ResultTable table;
    add_summary(table, column(reps, 0), sc, "ell", "coverage");
    add_summary(table, column(reps, 1), sc, "ell", "length");
    add_summary(table, column(reps, 2), sc, "t", "coverage");
    add_summary(table, column(reps, 3), sc, "t", "length");
    add_ratio(table, column(reps, 1), column(reps, 3), sc, "ell", "length_ratio_to_t");
    add_summary(table, column(reps, 4), sc, "oracle_one_sided", "coverage");
    add_summary(table, column(reps, 5), sc, "ell", "empty_rate");
    add_summary(table, column(reps, 6), sc, "ell", "gap_rate");
    return table;
}

ResultTable run_conditional_ci(const ScenarioConfig& c)
{
    const std::string sc = c.describe();
    const auto reps = run_replicates(c.replicates, [&](std::uint64_t r) {
        const Scenario s = generate_scenario(c, r);
        Rng rng = method_stream(c, r);
        const Index j = s.truth.j;
        const double bj = s.truth.beta[j];
        const LassoFit fit = solve(s.data.y(), s.data.X(), c.lambda);
        if (fit.beta[j] == 0.0) return std::vector<double>{0.0, kNaN, kNaN, kNaN};
        const GridSpec grid = default_grid(s.data, j, c.alpha, c.grid_points);
        const ConfidenceInterval ci = conditional_ci(s.data, j, c.lambda, c.alpha, c.cv_lambda_l, rng, grid, c.folds);
        const double len = ci.length();
        return std::vector<double>{1.0, indicator(ci.contains(bj)), std::isfinite(len) ? len : kNaN,
                                   indicator(!std::isfinite(len))};
    });
    ResultTable table;
    const std::string method = c.cv_lambda_l ? "conditional_cv" : "conditional";
    add_summary(table, column(reps, 0), sc, "lasso", "selection_rate");
    add_summary(table, column(reps, 1), sc, method, "coverage");
    add_summary(table, column(reps, 2), sc, method, "length");
    add_summary(table, column(reps, 3), sc, method, "unbounded_rate");
    return table;
}

// Variance decomposition of ell-test p-values over exogenous randomness:
// total SD across (dataset, draw) pairs against the mean within-dataset SD.
ResultTable run_lambda_variability(const ScenarioConfig& c)
{
    const std::string sc = c.describe();
    const auto reps = run_replicates(c.replicates, [&](std::uint64_t r) {
        const Scenario s = generate_scenario(c, r);
        std::vector<double> ps;
        for (int i = 0; i < c.inner; ++i) {
            Rng rng = Rng::substream(splitmix64(c.seed) ^ (2 * r + 1), static_cast<std::uint64_t>(i));
            ps.push_back(ell_test(s.data, s.truth.j, rng, test_options(c)).p);
        }
        return ps;
    });
    const auto outer = reps.size();
    // stats over a subset of outer replicates (skip = index left out, or -1)
    auto stats = [&](long skip) {
        double sum = 0.0, sumsq = 0.0, within = 0.0;
        long count = 0, groups = 0;
        for (std::size_t r = 0; r < outer; ++r) {
            if (static_cast<long>(r) == skip) continue;
            const auto& ps = reps[r];
            double m = 0.0;
            for (double p : ps) m += p;
            m /= static_cast<double>(ps.size());
            double v = 0.0;
            for (double p : ps) v += (p - m) * (p - m);
            within += v / static_cast<double>(ps.size() - 1);
            for (double p : ps) {
                sum += p;
                sumsq += p * p;
            }
            count += static_cast<long>(ps.size());
            ++groups;
        }
        const double mean = sum / static_cast<double>(count);
        const double total_var = (sumsq - count * mean * mean) / static_cast<double>(count - 1);
        const double total_sd = std::sqrt(std::max(total_var, 0.0));
        const double inner_sd = std::sqrt(within / static_cast<double>(groups));
        return std::array<double, 3>{total_sd, inner_sd, total_sd > 0 ? inner_sd / total_sd : 0.0};
    };
    const auto full = stats(-1);
    // jackknife over outer datasets
    std::array<double, 3> se{0.0, 0.0, 0.0};
    std::vector<std::array<double, 3>> loo;
    for (std::size_t r = 0; r < outer; ++r) loo.push_back(stats(static_cast<long>(r)));
    const double m = static_cast<double>(outer);
    for (int k = 0; k < 3; ++k) {
        double mean = 0.0;
        for (const auto& l : loo) mean += l[k];
        mean /= m;
        double ss = 0.0;
        for (const auto& l : loo) ss += (l[k] - mean) * (l[k] - mean);
        se[k] = std::sqrt((m - 1.0) / m * ss);
    }
    const long count = static_cast<long>(outer);
    ResultTable table;
    table.add({sc, "ell", "total_sd", full[0], se[0], count});
    table.add({sc, "ell", "inner_sd", full[1], se[1], count});
    table.add({sc, "ell", "inner_share", full[2], se[2], count});
    return table;
}

// Known-sigma tests in the proportional regime against their limits. One
// design, noise and support per replicate, shared by every amplitude.
ResultTable run_amp_validation(const ScenarioConfig& c)
{
    const std::vector<double> hs = c.h_grid.empty() ? std::vector<double>{c.amplitude} : c.h_grid;
    const double lambda_n = c.lambda / static_cast<double>(c.n);
    const auto reps = run_replicates(c.replicates, [&](std::uint64_t r) {
        Rng rng = data_stream(c, r);
        const double sd = 1.0 / std::sqrt(static_cast<double>(c.n));
        MatrixXd X(c.n, c.d);
        for (Index col = 0; col < c.d; ++col)
            for (Index i = 0; i < c.n; ++i) X(i, col) = sd * rng.normal();
        VectorXd mask(c.d);
        for (Index k = 0; k < c.d; ++k) mask[k] = indicator(rng.uniform() >= c.null_mass);
        mask[0] = 1.0;
        const VectorXd noise = c.sigma * rng.normal_vector(c.n);
        auto basis = std::make_shared<const DesignBasis>(X, 0);
        std::vector<double> out;
        for (double h : hs) {
            const VectorXd y = X * (h * mask) + noise;
            const NullDecomposition dec = decompose(basis, y, 0.0, c.sigma);
            const EllDistribution dist(dec, lambda_n);
            const double z1 = dec.u1();
            out.push_back(indicator(recentered_p(dist, z1) <= c.alpha));
            out.push_back(indicator(2.0 * norm_sf(std::fabs(z1)) <= c.alpha));
            out.push_back(indicator(norm_sf(z1) <= c.alpha));
        }
        return out;
    });
    ResultTable table;
    const double kappa = static_cast<double>(c.d) / static_cast<double>(c.n);
    const PowerTest tests[3] = {PowerTest::recentered, PowerTest::z_two, PowerTest::z_one};
    const char* names[3] = {"recentered", "z_two", "z_one"};
    for (std::size_t a = 0; a < hs.size(); ++a) {
        const std::string sc = c.describe() + ";h=" + format_double(hs[a]);
        const StateEvolutionSolution se = state_evolution(kappa, c.sigma, c.lambda, CoefPrior::sparse(c.null_mass, hs[a]));
        const FGDistribution fg = fg_distribution(hs[a], se);
        for (int t = 0; t < 3; ++t) {
            add_summary(table, column(reps, 3 * a + t), sc, names[t], "power_empirical");
            const PowerEstimate pe = asymptotic_power(tests[t], c.alpha, fg, c.theory_draws, c.seed);
            table.add({sc, names[t], "power_theory", pe.power, pe.se, c.theory_draws});
        }
    }
    return table;
}

std::vector<std::string> split_csv_record(std::istream& in, bool& ok)
{
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false, any = false;
    ok = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    if (!any) return fields;
    fields.push_back(field);
    ok = true;
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::vector<std::vector<std::string>> records;
    for (;;) {
        bool ok = false;
        auto rec = split_csv_record(in, ok);
        if (!ok) break;
        if (rec.size() == 1 && trim(rec[0]).empty()) continue; // blank line
        records.push_back(std::move(rec));
    }
    return records;
}

std::string quote_csv(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace

void ScenarioConfig::validate() const
{
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw InputError("config: " + msg);
    };
    need(n >= 2, "n must be at least 2");
    need(d >= 1, "d must be positive");
    need(k >= 0 && k <= d, "need 0 <= k <= d");
    need(amplitude >= 0.0, "amplitude must be non-negative");
    need(sigma > 0.0, "sigma must be positive");
    need(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
    need(replicates >= 2, "replicates must be at least 2");
    need(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    need(folds >= 2 && folds <= n, "folds must lie in [2, n]");
    need(grid_points >= 3, "grid_points must be at least 3");
    if (kind == ScenarioKind::amp_validation) {
        need(n >= d, "amp_validation needs n >= d");
        need(d < n, "amp_validation needs d < n");
        need(lambda > 0.0, "lambda must be positive");
        need(null_mass >= 0.0 && null_mass < 1.0, "null_mass must lie in [0, 1)");
        need(theory_draws >= 2, "theory_draws must be at least 2");
        return;
    }
    need(n >= d + 1, "n must exceed d");
    need(d >= 2, "d must be at least 2");
    if (test_null)
        need(k < d, "test_null needs a null coordinate (k < d)");
    else
        need(k >= 1, "testing a signal needs k >= 1");
    if (kind == ScenarioKind::robustness) need(test_null, "robustness tests a null coordinate (test_null = true)");
    if (kind == ScenarioKind::conditional_ci) need(lambda > 0.0, "lambda must be positive");
    if (kind == ScenarioKind::lambda_variability) need(inner >= 2, "inner must be at least 2");
    if (error == ErrorKind::t) need(nu > 0.0, "nu must be positive");
    if (error == ErrorKind::gamma) need(shape > 0.0, "shape must be positive");
    if (error == ErrorKind::heteroskedastic) need(eta > 0.0, "eta must be positive");
    if (error == ErrorKind::nonlinear) need(delta > 0.0, "delta must be positive");
}

std::string ScenarioConfig::describe() const
{
    std::ostringstream os;
    if (!name.empty()) os << "name=" << name << ";";
    os << "kind=" << kind_name(kind) << ";n=" << n << ";d=" << d;
    if (kind == ScenarioKind::amp_validation) {
        os << ";sigma=" << format_double(sigma) << ";lambda=" << format_double(lambda)
           << ";null_mass=" << format_double(null_mass);
        return os.str();
    }
    os << ";k=" << k << ";amplitude=" << format_double(amplitude) << ";sigma=" << format_double(sigma)
       << ";rho=" << format_double(rho) << ";error=" << error_name(error);
    switch (error) {
    case ErrorKind::t: os << ";nu=" << format_double(nu); break;
    case ErrorKind::gamma: os << ";shape=" << format_double(shape); break;
    case ErrorKind::heteroskedastic: os << ";eta=" << format_double(eta); break;
    case ErrorKind::nonlinear: os << ";delta=" << format_double(delta); break;
    default: break;
    }
    if (test_null) os << ";null";
    if (kind == ScenarioKind::conditional_ci) os << ";lambda=" << format_double(lambda);
    return os.str();
}

ScenarioConfig parse_config(const std::string& text)
{
    ScenarioConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string what = "config key '" + key + "'";
        if (key == "kind") {
            static const std::map<std::string, ScenarioKind> kinds{
                {"power", ScenarioKind::power},
                {"ci", ScenarioKind::ci},
                {"conditional_ci", ScenarioKind::conditional_ci},
                {"robustness", ScenarioKind::robustness},
                {"lambda_variability", ScenarioKind::lambda_variability},
                {"amp_validation", ScenarioKind::amp_validation}};
            const auto it = kinds.find(val);
            if (it == kinds.end()) throw InputError(what + ": unknown kind '" + val + "'");
            c.kind = it->second;
        } else if (key == "error") {
            static const std::map<std::string, ErrorKind> errs{{"gaussian", ErrorKind::gaussian},
                                                               {"t", ErrorKind::t},
                                                               {"gamma", ErrorKind::gamma},
                                                               {"heteroskedastic", ErrorKind::heteroskedastic},
                                                               {"nonlinear", ErrorKind::nonlinear}};
            const auto it = errs.find(val);
            if (it == errs.end()) throw InputError(what + ": unknown error kind '" + val + "'");
            c.error = it->second;
        } else if (key == "rule") {
            if (val == "min")
                c.rule = CvRule::min;
            else if (val == "1se")
                c.rule = CvRule::one_se;
            else
                throw InputError(what + ": expected min or 1se");
        } else if (key == "name") {
            c.name = val;
        } else if (key == "n") {
            c.n = parse_integer(val, what);
        } else if (key == "d") {
            c.d = parse_integer(val, what);
        } else if (key == "k") {
            c.k = parse_integer(val, what);
        } else if (key == "amplitude") {
            c.amplitude = parse_number(val, what);
        } else if (key == "sigma") {
            c.sigma = parse_number(val, what);
        } else if (key == "rho") {
            c.rho = parse_number(val, what);
        } else if (key == "replicates") {
            c.replicates = parse_integer(val, what);
        } else if (key == "alpha") {
            c.alpha = parse_number(val, what);
        } else if (key == "seed") {
            const long s = parse_integer(val, what);
            if (s < 0) throw InputError(what + ": must be non-negative");
            c.seed = static_cast<std::uint64_t>(s);
        } else if (key == "folds") {
            c.folds = static_cast<int>(parse_integer(val, what));
        } else if (key == "nu") {
            c.nu = parse_number(val, what);
        } else if (key == "shape") {
            c.shape = parse_number(val, what);
        } else if (key == "eta") {
            c.eta = parse_number(val, what);
        } else if (key == "delta") {
            c.delta = parse_number(val, what);
        } else if (key == "test_null") {
            c.test_null = parse_bool(val, what);
        } else if (key == "normalize") {
            c.normalize = parse_bool(val, what);
        } else if (key == "grid_points") {
            c.grid_points = static_cast<int>(parse_integer(val, what));
        } else if (key == "lambda") {
            c.lambda = parse_number(val, what);
        } else if (key == "cv_lambda_l") {
            c.cv_lambda_l = parse_bool(val, what);
        } else if (key == "inner") {
            c.inner = static_cast<int>(parse_integer(val, what));
        } else if (key == "null_mass") {
            c.null_mass = parse_number(val, what);
        } else if (key == "h_grid") {
            c.h_grid = parse_list(val, what);
        } else if (key == "theory_draws") {
            c.theory_draws = parse_integer(val, what);
        } else {
            throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

Scenario generate_scenario(const ScenarioConfig& c, std::uint64_t replicate)
{
    Rng rng = data_stream(c, replicate);
    Scenario s;
    s.truth.sigma = c.sigma;
    s.truth.beta = VectorXd::Zero(c.d);

    if (c.kind == ScenarioKind::amp_validation) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(c.n));
        MatrixXd X(c.n, c.d);
        for (Index col = 0; col < c.d; ++col)
            for (Index i = 0; i < c.n; ++i) X(i, col) = sd * rng.normal();
        for (Index k = 0; k < c.d; ++k) s.truth.beta[k] = rng.uniform() >= c.null_mass ? c.amplitude : 0.0;
        s.truth.beta[0] = c.amplitude;
        s.truth.j = 0;
        const VectorXd y = X * s.truth.beta + c.sigma * rng.normal_vector(c.n);
        s.data = LinearModelData(y, X);
        return s;
    }

    const MatrixXd raw = toeplitz_rows(c.n, c.d, c.rho, rng);
    const MatrixXd X = c.normalize ? normalize_columns(raw) : raw;
    const auto perm = rng.permutation(c.d);
    for (Index i = 0; i < c.k; ++i)
        s.truth.beta[perm[static_cast<std::size_t>(i)]] = rng.uniform() < 0.5 ? c.amplitude : -c.amplitude;
    if (c.test_null)
        s.truth.j = perm[static_cast<std::size_t>(c.k + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(c.d - c.k)))];
    else
        s.truth.j = perm[static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(c.k))];

    VectorXd mean;
    if (c.error == ErrorKind::nonlinear)
        mean = raw.unaryExpr([&](double x) { return model_power(x, c.delta); }) * s.truth.beta;
    else
        mean = X * s.truth.beta;

    VectorXd eps(c.n);
    for (Index i = 0; i < c.n; ++i) {
        switch (c.error) {
        case ErrorKind::gaussian:
        case ErrorKind::nonlinear: eps[i] = rng.normal(); break;
        case ErrorKind::t: {
            const double t = rng.student_t(c.nu);
            eps[i] = c.nu > 2.0 ? t * std::sqrt((c.nu - 2.0) / c.nu) : t;
            break;
        }
        case ErrorKind::gamma: eps[i] = (rng.gamma(c.shape) - c.shape) / std::sqrt(c.shape); break;
        case ErrorKind::heteroskedastic: {
            const double z = rng.normal();
            eps[i] = raw.row(i).mean() < 0.0 ? z : c.eta * z;
            break;
        }
        }
    }
    s.data = LinearModelData(mean + c.sigma * eps, X);
    return s;
}

void ResultTable::append(const ResultTable& other)
{
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

const ResultRow& ResultTable::find(const std::string& method, const std::string& metric) const
{
    for (const auto& r : rows_)
        if (r.method == method && r.metric == metric) return r;
    throw InputError("no result row for " + method + "/" + metric);
}

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string ResultTable::to_csv() const
{
    std::string out = "scenario,method,metric,value,se,count\n";
    for (const auto& r : rows_) {
        out += quote_csv(r.scenario) + "," + quote_csv(r.method) + "," + quote_csv(r.metric) + "," +
               format_double(r.value) + "," + format_double(r.se) + "," + std::to_string(r.count) + "\n";
    }
    return out;
}

void ResultTable::write_csv(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << to_csv();
}

ResultRow summarize(const std::vector<double>& values, std::string scenario, std::string method, std::string metric)
{
    double sum = 0.0;
    long count = 0;
    for (double v : values)
        if (std::isfinite(v)) {
            sum += v;
            ++count;
        }
    ResultRow row{std::move(scenario), std::move(method), std::move(metric), 0.0, 0.0, count};
    if (count == 0) return row;
    row.value = sum / static_cast<double>(count);
    if (count > 1) {
        double ss = 0.0;
        for (double v : values)
            if (std::isfinite(v)) ss += (v - row.value) * (v - row.value);
        row.se = std::sqrt(ss / static_cast<double>(count - 1)) / std::sqrt(static_cast<double>(count));
    }
    return row;
}

ResultTable run_scenario(const ScenarioConfig& config)
{
    config.validate();
    switch (config.kind) {
    case ScenarioKind::power: return run_power(config, false);
    case ScenarioKind::robustness: return run_power(config, true);
    case ScenarioKind::ci: return run_ci(config);
    case ScenarioKind::conditional_ci: return run_conditional_ci(config);
    case ScenarioKind::lambda_variability: return run_lambda_variability(config);
    case ScenarioKind::amp_validation: return run_amp_validation(config);
    }
    throw InputError("unknown scenario kind");
}

CsvData load_csv(const std::string& path, const std::string& response, const std::vector<std::string>& drop,
                 bool normalize, bool known_sigma)
{
    const auto records = read_csv(path);
    if (records.empty()) throw InputError("'" + path + "' has no header");
    std::vector<std::string> header;
    for (const auto& h : records[0]) header.push_back(trim(h));
    const auto find = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InputError("column '" + name + "' not found in '" + path + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t yc = find(response);
    std::vector<bool> skip(header.size(), false);
    skip[yc] = true;
    for (const auto& name : drop) skip[find(name)] = true;

    CsvData out;
    std::vector<std::size_t> xcols;
    for (std::size_t k = 0; k < header.size(); ++k)
        if (!skip[k]) {
            xcols.push_back(k);
            out.columns.push_back(header[k]);
        }
    if (xcols.empty()) throw InputError("no predictor columns in '" + path + "'");
    const auto n = static_cast<Index>(records.size() - 1);
    if (n == 0) throw InputError("'" + path + "' has no data rows");
    VectorXd y(n);
    MatrixXd X(n, static_cast<Index>(xcols.size()));
    for (Index i = 0; i < n; ++i) {
        const auto& rec = records[static_cast<std::size_t>(i + 1)];
        if (rec.size() != header.size())
            throw InputError("row " + std::to_string(i + 1) + " has " + std::to_string(rec.size()) + " fields, expected " +
                             std::to_string(header.size()));
        auto cell = [&](std::size_t k) {
            return parse_number(rec[k], "row " + std::to_string(i + 1) + ", column '" + header[k] + "'");
        };
        y[i] = cell(yc);
        for (std::size_t a = 0; a < xcols.size(); ++a) X(i, static_cast<Index>(a)) = cell(xcols[a]);
    }
    if (normalize) X = normalize_columns(X);
    out.data = LinearModelData(y, X);
    if (known_sigma)
        out.data.require_known_sigma();
    else
        out.data.require_unknown_sigma();
    return out;
}

MatrixXd load_matrix_csv(const std::string& path)
{
    const auto records = read_csv(path);
    if (records.empty()) throw InputError("'" + path + "' is empty");
    const std::size_t cols = records[0].size();
    MatrixXd M(static_cast<Index>(records.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].size() != cols) throw InputError("'" + path + "': ragged row " + std::to_string(i + 1));
        for (std::size_t k = 0; k < cols; ++k)
            M(static_cast<Index>(i), static_cast<Index>(k)) =
                parse_number(records[i][k], "'" + path + "' row " + std::to_string(i + 1) + ", column " + std::to_string(k + 1));
    }
    return M;
}

} // namespace elltest
