#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace robinhom::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_validation_failed = 1,
    exit_config_error = 2,
    exit_no_convergence = 3,
};

/// Effective configuration of one run. Precedence: flags, then the JSON
/// config file, then per-subcommand defaults.
struct RunConfig {
    std::string subcommand;
    int n = 3;
    std::vector<double> eps;
    std::vector<double> kappa;
    std::vector<double> beta;
    double alpha = 0.0;
    std::vector<double> a;
    int level = 2;
    double eig_tol = 1e-9;
    double linear_tol = 1e-11;
    double bracket_tol = 0.0;    ///< 0: evaluator default
    double radius = 1000.0;      ///< exterior truncation radius R
    int intervals = 512;         ///< exterior radial intervals m
    std::string evaluator = "closed_form";
    int grid = 0;                ///< FEM grid for u_0; 0 selects the closed form
    double f_amplitude = 0.0;    ///< source amp * prod sin(pi x_i)
    std::string output;
    std::string format = "json";
    std::string mesh_dump;
    std::string matrix_dump;
    int threads = 1;
    bool quick = false;
    std::string inject_fault;
    std::vector<std::string> defaulted;  ///< keys left at their defaults
};

/// Parses argv (argv[0] is the program name), runs the subcommand and returns
/// the exit code. Results go to --output or `out`; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "0.5,1/3,0.25" style lists. Throws std::invalid_argument.
std::vector<double> parse_list(const std::string& text);

} // namespace robinhom::cli
