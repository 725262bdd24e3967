#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elltest/cross_validation.hpp"
#include "elltest/linear_model.hpp"

namespace elltest {

enum class ScenarioKind { power, ci, conditional_ci, robustness, lambda_variability, amp_validation };
enum class ErrorKind { gaussian, t, gamma, heteroskedastic, nonlinear };

// One simulation scenario. Parsed from a key = value file; see README for
// the key list.
struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::power;
    std::string name;
    Index n = 100;
    Index d = 50;
    Index k = 5;
    double amplitude = 4.3;
    double sigma = 1.0;
    double rho = 0.0;
    long replicates = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int folds = 10;
    CvRule rule = CvRule::min;

    ErrorKind error = ErrorKind::gaussian;
    double nu = 2.0;    // t errors
    double shape = 1.0; // gamma errors
    double eta = 1.0;   // heteroskedastic: sd multiplier on rows with positive mean
    double delta = 4.0; // nonlinear power

    bool test_null = false; // test a coordinate with beta_j = 0
    bool normalize = true;
    int grid_points = 200;  // CI grids

    double lambda = 0.01;    // conditional_ci: selection penalty; amp_validation: penalty on the (1/2)||.||^2 scale
    bool cv_lambda_l = false;
    int inner = 30;          // lambda_variability re-randomizations
    double null_mass = 0.9;  // amp_validation prior
    std::vector<double> h_grid; // amp_validation amplitudes (default: amplitude)
    long theory_draws = 1000000;

    void validate() const;
    // Compact parameter string used in the scenario column.
    std::string describe() const;
};

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

struct Truth {
    VectorXd beta;
    Index j = 0;
    double sigma = 1.0;
};

struct Scenario {
    LinearModelData data;
    Truth truth;
};

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t replicate);

struct ResultRow {
    std::string scenario;
    std::string method;
    std::string metric;
    double value = 0.0;
    double se = 0.0;
    long count = 0;
};

class ResultTable {
public:
    void add(ResultRow row) { rows_.push_back(std::move(row)); }
    void append(const ResultTable& other);
    const std::vector<ResultRow>& rows() const { return rows_; }
    // First row matching method and metric; throws if absent.
    const ResultRow& find(const std::string& method, const std::string& metric) const;
    std::string to_csv() const;
    void write_csv(const std::string& path) const;

private:
    std::vector<ResultRow> rows_;
};

ResultTable run_scenario(const ScenarioConfig& config);

// Mean and sample SD / sqrt(count) of a sample.
ResultRow summarize(const std::vector<double>& values, std::string scenario, std::string method, std::string metric);

struct CsvData {
    LinearModelData data;
    std::vector<std::string> columns; // names of the columns of X
};

CsvData load_csv(const std::string& path, const std::string& response, const std::vector<std::string>& drop = {},
                 bool normalize = false, bool known_sigma = false);

// Plain numeric matrix from CSV (no header), for asymptotic inputs.
MatrixXd load_matrix_csv(const std::string& path);

std::string format_double(double x);

} // namespace elltest
