#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "acceptance.hpp"
#include "robinhom/assembly.hpp"
#include "robinhom/cellmesh.hpp"
#include "robinhom/cellspec.hpp"
#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"
#include "robinhom/homog.hpp"
#include "robinhom/parallel.hpp"
#include "robinhom/strangeterm.hpp"

#ifndef ROBINHOM_VERSION
#define ROBINHOM_VERSION "unknown"
#endif

namespace robinhom::cli {

namespace {

using nlohmann::ordered_json;
constexpr double kPi = std::numbers::pi;
constexpr int kSchemaVersion = 1;

/// Invalid configuration; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- parsing

double parse_number(const std::string& tok)
{
    std::size_t pos = 0;
    const auto slash = tok.find('/');
    try {
        if (slash != std::string::npos) {
            const double num = std::stod(tok.substr(0, slash), &pos);
            if (pos != slash)
                throw std::invalid_argument(tok);
            const std::string den_s = tok.substr(slash + 1);
            const double den = std::stod(den_s, &pos);
            if (pos != den_s.size() || den == 0.0)
                throw std::invalid_argument(tok);
            return num / den;
        }
        const double v = std::stod(tok, &pos);
        if (pos != tok.size())
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::out_of_range&) {
        throw std::invalid_argument("number out of range: " + tok);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("not a number: '" + tok + "'");
    }
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

int parse_int(const std::string& text)
{
    const double v = parse_number(trim(text));
    if (v != std::floor(v) || std::abs(v) > 1e9)
        throw std::invalid_argument("not an integer: '" + text + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& text)
{
    if (text == "true" || text == "1")
        return true;
    if (text == "false" || text == "0")
        return false;
    throw std::invalid_argument("not a boolean: '" + text + "'");
}

/// JSON config value to the flag's text form.
std::string json_to_text(const nlohmann::json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    if (v.is_number()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) {
            if (e.is_array() || e.is_object())
                throw std::invalid_argument("nested arrays are not allowed");
            out += (out.empty() ? "" : ",") + json_to_text(e);
        }
        return out;
    }
    throw std::invalid_argument("unsupported JSON value " + v.dump());
}

// ---------------------------------------------------------------- fields

struct Field {
    std::string name;
    std::string help;
    std::set<std::string> subs;
    bool is_flag = false;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::set<std::string> kMeshed{"cell-spectrum", "homogenize", "convergence", "regimes"};
const std::vector<std::string> kSubcommands{"cell-spectrum", "exterior", "strange-term", "homogenize",
                                            "convergence", "regimes", "validate"};

std::set<std::string> all_but_validate()
{
    return {"cell-spectrum", "exterior", "strange-term", "homogenize", "convergence", "regimes"};
}

std::set<std::string> all_subs()
{
    return {kSubcommands.begin(), kSubcommands.end()};
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        auto add = [&](std::string name, std::string help, std::set<std::string> subs,
                       std::function<void(RunConfig&, const std::string&)> set, bool flag = false) {
            v.push_back({std::move(name), std::move(help), std::move(subs), flag, std::move(set)});
        };
        add("n", "space dimension (meshed subcommands require 3)", all_but_validate(),
            [](RunConfig& c, const std::string& s) { c.n = parse_int(s); });
        add("eps", "comma-separated eps list, e.g. 1/2,1/3,1/4",
            {"cell-spectrum", "strange-term", "homogenize", "convergence", "regimes"},
            [](RunConfig& c, const std::string& s) { c.eps = parse_list(s); });
        add("kappa", "comma-separated kappa list", {"cell-spectrum", "exterior", "regimes"},
            [](RunConfig& c, const std::string& s) { c.kappa = parse_list(s); });
        add("beta", "comma-separated beta list", {"strange-term", "homogenize", "convergence"},
            [](RunConfig& c, const std::string& s) { c.beta = parse_list(s); });
        add("alpha", "zero-order coefficient alpha >= 0", {"homogenize", "convergence"},
            [](RunConfig& c, const std::string& s) { c.alpha = parse_number(trim(s)); });
        add("a", "hole scaling exponent(s): physical radius eps^a",
            {"cell-spectrum", "strange-term", "homogenize", "convergence", "regimes"},
            [](RunConfig& c, const std::string& s) { c.a = parse_list(s); });
        add("level", "cell mesh level (1..8)",
            {"cell-spectrum", "strange-term", "homogenize", "convergence", "regimes"},
            [](RunConfig& c, const std::string& s) { c.level = parse_int(s); });
        add("eig-tol", "eigen residual tolerance",
            {"cell-spectrum", "strange-term", "homogenize", "convergence", "regimes"},
            [](RunConfig& c, const std::string& s) { c.eig_tol = parse_number(trim(s)); });
        add("linear-tol", "linear solver tolerance",
            {"cell-spectrum", "strange-term", "homogenize", "convergence", "regimes"},
            [](RunConfig& c, const std::string& s) { c.linear_tol = parse_number(trim(s)); });
        add("bracket-tol", "kappa_* bracket width (0: evaluator default)", {"strange-term"},
            [](RunConfig& c, const std::string& s) { c.bracket_tol = parse_number(trim(s)); });
        add("radius", "exterior truncation radius R", {"exterior", "strange-term"},
            [](RunConfig& c, const std::string& s) { c.radius = parse_number(trim(s)); });
        add("intervals", "exterior radial intervals m", {"exterior", "strange-term"},
            [](RunConfig& c, const std::string& s) { c.intervals = parse_int(s); });
        add("evaluator", "closed_form | exterior_numeric | cell_extrapolated", {"strange-term"},
            [](RunConfig& c, const std::string& s) { c.evaluator = trim(s); });
        add("grid", "intervals per side of the FEM grid for u_0 (0: closed form)",
            {"homogenize", "convergence"},
            [](RunConfig& c, const std::string& s) { c.grid = parse_int(s); });
        add("f-amplitude", "source amplitude A in f = A prod sin(pi x_i)", {"homogenize", "convergence"},
            [](RunConfig& c, const std::string& s) { c.f_amplitude = parse_number(trim(s)); });
        add("output", "output file (default: standard output)", all_subs(),
            [](RunConfig& c, const std::string& s) { c.output = s; });
        add("format", "csv | json", all_subs(), [](RunConfig& c, const std::string& s) { c.format = trim(s); });
        add("mesh-dump", "write the mesh JSON of the first eps to this file", {"cell-spectrum", "homogenize"},
            [](RunConfig& c, const std::string& s) { c.mesh_dump = s; });
        add("matrix-dump", "write matrices of the first eps as <prefix>.<name>.txt",
            {"cell-spectrum", "homogenize"}, [](RunConfig& c, const std::string& s) { c.matrix_dump = s; });
        add("threads", "parallel tasks for sweeps", all_subs(),
            [](RunConfig& c, const std::string& s) { c.threads = parse_int(s); });
        add("quick", "run the closed-form and small-mesh subset", {"validate"},
            [](RunConfig& c, const std::string& s) { c.quick = parse_bool(s); }, true);
        add("inject-fault", "fault injection: constraint-sign", {"validate"},
            [](RunConfig& c, const std::string& s) { c.inject_fault = trim(s); });
        return v;
    }();
    return f;
}

RunConfig defaults_for(const std::string& sub)
{
    RunConfig c;
    c.subcommand = sub;
    c.eps = {0.5, 1.0 / 3.0, 0.25};
    c.kappa = {2.0};
    c.beta = {4 * kPi};
    c.a = {3.0};
    c.f_amplitude = 3 * kPi * kPi + 2 * kPi;
    if (sub == "homogenize")
        c.eps = {0.5};
    if (sub == "regimes")
        c.a = {4.0, 2.0, 3.0};
    return c;
}

ordered_json config_json(const RunConfig& c)
{
    ordered_json j;
    j["subcommand"] = c.subcommand;
    const auto& subs_of = [&](const std::string& name) {
        for (const auto& f : fields())
            if (f.name == name)
                return f.subs.count(c.subcommand) > 0;
        return false;
    };
    auto put = [&](const std::string& key, auto value) {
        if (subs_of(key))
            j[key] = value;
    };
    put("n", c.n);
    put("eps", c.eps);
    put("kappa", c.kappa);
    put("beta", c.beta);
    put("alpha", c.alpha);
    put("a", c.a);
    put("level", c.level);
    put("eig-tol", c.eig_tol);
    put("linear-tol", c.linear_tol);
    put("bracket-tol", c.bracket_tol);
    put("radius", c.radius);
    put("intervals", c.intervals);
    put("evaluator", c.evaluator);
    put("grid", c.grid);
    put("f-amplitude", c.f_amplitude);
    put("output", c.output);
    put("format", c.format);
    put("mesh-dump", c.mesh_dump);
    put("matrix-dump", c.matrix_dump);
    put("threads", c.threads);
    put("quick", c.quick);
    put("inject-fault", c.inject_fault);
    j["defaulted"] = c.defaulted;
    return j;
}

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw ConfigError(msg);
}

int cells_from_eps(double eps)
{
    const double inv = 1.0 / eps;
    const double r = std::round(inv);
    require(std::abs(inv - r) <= 1e-9 * r, "eps = " + std::to_string(eps) + " is not 1/N for an integer N");
    return static_cast<int>(r);
}

void validate(const RunConfig& c)
{
    const std::string& s = c.subcommand;
    require(c.format == "csv" || c.format == "json", "format must be csv or json");
    require(c.threads >= 1 && c.threads <= 256, "threads must lie in [1, 256]");
    if (s == "validate") {
        require(c.inject_fault.empty() || c.inject_fault == "constraint-sign",
                "inject-fault must be 'constraint-sign'");
        return;
    }
    require(c.n >= 3, "n must be at least 3");
    if (kMeshed.count(s) || (s == "strange-term" && c.evaluator == "cell_extrapolated"))
        require(c.n == 3, "meshed computations are three-dimensional (n = 3)");
    auto decreasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] < v[i - 1]))
                return false;
        return true;
    };
    auto uses = [&](const char* key) {
        for (const auto& f : fields())
            if (f.name == key)
                return f.subs.count(s) > 0;
        return false;
    };
    if (uses("eps")) {
        require(!c.eps.empty(), "eps list is empty");
        for (double e : c.eps)
            require(e > 0.0 && e < 1.0, "eps values must lie in (0, 1)");
        require(decreasing(c.eps), "eps list must be strictly decreasing");
        if (s == "homogenize" || s == "convergence")
            for (double e : c.eps)
                cells_from_eps(e);
    }
    if (uses("kappa")) {
        require(!c.kappa.empty(), "kappa list is empty");
        for (double k : c.kappa) {
            require(k > 0.0, "kappa values must be positive");
            if (s != "exterior")
                require(k != 1.0, "kappa = 1 is excluded");
        }
    }
    if (uses("beta")) {
        require(!c.beta.empty(), "beta list is empty");
        for (double b : c.beta)
            require(b > 0.0 && std::isfinite(b), "beta values must be positive");
        if (s == "strange-term")
            require(decreasing({c.beta.rbegin(), c.beta.rend()}), "beta list must be strictly increasing");
    }
    if (uses("alpha"))
        require(c.alpha >= 0.0 && std::isfinite(c.alpha), "alpha must be nonnegative");
    if (uses("a")) {
        require(!c.a.empty(), "a list is empty");
        for (double a : c.a)
            require(a > 1.0, "scaling exponent a must exceed 1");
        if (s != "regimes")
            require(c.a.size() == 1, "this subcommand takes a single scaling exponent a");
    }
    if (uses("level"))
        require(c.level >= 1 && c.level <= 8, "level must lie in [1, 8]");
    if (uses("eig-tol"))
        require(c.eig_tol > 0.0 && c.linear_tol > 0.0, "tolerances must be positive");
    if (uses("bracket-tol"))
        require(c.bracket_tol >= 0.0, "bracket-tol must be nonnegative");
    if (uses("radius"))
        require(c.radius > 1.0 && c.intervals >= 8, "need radius > 1 and intervals >= 8");
    if (uses("evaluator"))
        require(c.evaluator == "closed_form" || c.evaluator == "exterior_numeric" ||
                    c.evaluator == "cell_extrapolated",
                "evaluator must be closed_form, exterior_numeric or cell_extrapolated");
    if (s == "strange-term" && c.evaluator == "cell_extrapolated")
        require(c.eps.size() >= 2, "cell_extrapolated needs at least two eps values");
    if (uses("grid"))
        require(c.grid == 0 || (c.grid >= 2 && c.grid <= 256), "grid must be 0 or lie in [2, 256]");
    if (uses("f-amplitude"))
        require(std::isfinite(c.f_amplitude), "f-amplitude must be finite");
}

// ---------------------------------------------------------------- output

/// A result table plus a free-form summary object.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<ordered_json>> rows;
    ordered_json summary = ordered_json::object();

    void add(std::vector<ordered_json> row)
    {
        if (row.size() != columns.size())
            throw std::logic_error("row width mismatch");
        rows.push_back(std::move(row));
    }
};

std::string csv_cell(const ordered_json& v)
{
    if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char ch : s)
            q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    if (v.is_null())
        return "";
    return v.dump();
}

std::string render(const RunConfig& c, const Table& t, double seconds)
{
    ordered_json meta;
    meta["schema"] = "robinhom-result";
    meta["schema_version"] = kSchemaVersion;
    meta["tool"] = {{"name", "robinhom"}, {"version", ROBINHOM_VERSION}};
    meta["config"] = config_json(c);
    meta["timings"] = {{"wall_seconds", seconds}};

    if (c.format == "json") {
        ordered_json j = meta;
        j["columns"] = t.columns;
        ordered_json rows = ordered_json::array();
        for (const auto& r : t.rows) {
            ordered_json o;
            for (std::size_t i = 0; i < r.size(); ++i)
                o[t.columns[i]] = r[i];
            rows.push_back(std::move(o));
        }
        j["rows"] = std::move(rows);
        j["summary"] = t.summary;
        return j.dump(2) + "\n";
    }
    std::ostringstream os;
    os << "# robinhom-result v" << kSchemaVersion << " robinhom " << ROBINHOM_VERSION << "\n";
    os << "# config: " << meta["config"].dump() << "\n";
    os << "# summary: " << t.summary.dump() << "\n";
    os << "# timings: " << meta["timings"].dump() << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            os << (i ? "," : "") << csv_cell(r[i]);
        os << "\n";
    }
    return os.str();
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw ConfigError("cannot open '" + path + "' for writing");
    f << content;
    if (!f)
        throw ConfigError("failed writing '" + path + "'");
}

void check_writable_dir(const std::string& path)
{
    if (path.empty())
        return;
    const auto parent = std::filesystem::path(path).parent_path();
    require(parent.empty() || std::filesystem::is_directory(parent),
            "directory of '" + path + "' does not exist");
}

/// Files produced by a run, written only after all computation succeeded.
struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;
};

void dump_matrices(Artifacts& art, const std::string& prefix,
                   const std::vector<std::pair<std::string, const SparseSym*>>& mats)
{
    for (const auto& [name, m] : mats)
        art.files.emplace_back(prefix + "." + name + ".txt", matrix_to_coordinate_text(*m));
}

CellSolveOptions cell_options(const RunConfig& c)
{
    CellSolveOptions o;
    o.eig_tol = c.eig_tol;
    o.linear_tol = c.linear_tol;
    return o;
}

// ---------------------------------------------------------------- subcommands

std::string number_key(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

ordered_json extrapolation_json(const ExtrapolationResult& e)
{
    ordered_json j;
    j["limit"] = e.limit;
    j["limit_polynomial"] = e.limit_polynomial;
    j["fitted_order"] = std::isnan(e.fitted_order) ? ordered_json(nullptr) : ordered_json(e.fitted_order);
    j["uncertainty"] = e.uncertainty;
    j["non_monotone"] = e.non_monotone;
    j["scaled"] = e.scaled;
    return j;
}

Table cmd_cell_spectrum(const RunConfig& c, Artifacts& art)
{
    struct EpsResult {
        double eps, r, dir, st, cap, vol, s_h;
        std::vector<KappaEigen> eigs;
    };
    const double a = c.a.front();
    const CellSolveOptions opts = cell_options(c);
    // Radii are validated up front so that no work starts on a bad chain.
    for (double e : c.eps)
        cell_hole_radius(e, a, 3);

    const auto results = parallel_map(c.eps.size(), c.threads, [&](std::size_t i) {
        EpsResult r{};
        r.eps = c.eps[i];
        r.r = cell_hole_radius(r.eps, a, 3);
        const CellMesh pm = build_cell_mesh(r.r, c.level, OuterMode::periodic);
        const FormSet pf = assemble_cell_forms(pm);
        const CellMesh om = build_cell_mesh(r.r, c.level, OuterMode::dirichlet_outer);
        const FormSet of = assemble_cell_forms(om);
        r.dir = lambda_dir(pm, pf, opts).value;
        r.st = lambda_st(om, of, opts).value;
        r.cap = capacity(om, of, opts).cap;
        r.vol = pf.vol_h;
        r.s_h = pf.s_h;
        for (double k : c.kappa)
            r.eigs.push_back(lambda_eps_kappa(pm, pf, k, default_shift(r.r, k), opts));
        return r;
    });

    if (!c.mesh_dump.empty() || !c.matrix_dump.empty()) {
        const double r = cell_hole_radius(c.eps.front(), a, 3);
        const CellMesh pm = build_cell_mesh(r, c.level, OuterMode::periodic);
        if (!c.mesh_dump.empty())
            art.files.emplace_back(c.mesh_dump, mesh_to_json(pm));
        if (!c.matrix_dump.empty()) {
            const FormSet pf = assemble_cell_forms(pm);
            dump_matrices(art, c.matrix_dump, {{"A", &pf.A}, {"M", &pf.M}, {"B", &pf.B}});
        }
    }

    Table t;
    t.columns = {"eps", "kappa", "lambda", "lambda_over_eps2", "lambda_dir", "lambda_st", "cap",
                 "eig_residual", "rayleigh_residual", "bdav_residual", "constraint_value", "sign_definite",
                 "r_cell", "vol_h", "s_h", "retries"};
    for (const auto& r : results)
        for (const auto& e : r.eigs)
            t.add({r.eps, e.kappa, e.lambda, e.lambda / (r.eps * r.eps), r.dir, r.st, r.cap, e.residual,
                   e.rayleigh_residual, e.bdav_residual, e.constraint_value, e.sign_definite, r.r, r.vol,
                   r.s_h, e.retries});

    const StarConstants sc = star_constants(3);
    t.summary["lambda_star_ball"] = ordered_json::object();
    for (double k : c.kappa)
        t.summary["lambda_star_ball"][number_key(k)] = lambda_star_ball(k, 3);
    t.summary["star_constant"] = sc.cap_star;
    if (results.size() >= 2) {
        std::vector<std::pair<double, double>> dir, st, cap;
        for (const auto& r : results) {
            dir.emplace_back(r.eps, r.dir);
            st.emplace_back(r.eps, r.st);
            cap.emplace_back(r.eps, r.cap);
        }
        ordered_json ex;
        ex["lambda_dir"] = extrapolation_json(extrapolate_star(dir));
        ex["lambda_st"] = extrapolation_json(extrapolate_star(st));
        ex["cap"] = extrapolation_json(extrapolate_star(cap));
        for (std::size_t k = 0; k < c.kappa.size(); ++k) {
            std::vector<std::pair<double, double>> lam;
            for (const auto& r : results)
                lam.emplace_back(r.eps, r.eigs[k].lambda);
            ex["lambda_kappa_" + number_key(c.kappa[k])] = extrapolation_json(extrapolate_star(lam));
        }
        t.summary["extrapolation"] = std::move(ex);
    }
    return t;
}

Table cmd_exterior(const RunConfig& c)
{
    Table t;
    t.columns = {"kappa", "n", "lambda_star", "lambda_star_numeric", "relative_error", "radius", "intervals"};
    for (double k : c.kappa) {
        const double closed = lambda_star_ball(k, c.n);
        const double numeric = exterior_numeric(k, c.n, c.radius, c.intervals);
        const double err = closed == 0.0 ? std::abs(numeric) : std::abs(numeric - closed) / std::abs(closed);
        t.add({k, c.n, closed, numeric, err, c.radius, c.intervals});
    }
    const StarConstants sc = star_constants(c.n);
    t.summary = {{"sigma_n", sc.sigma_n},
                 {"cap_star", sc.cap_star},
                 {"lambda_dir_star", sc.lambda_dir_star},
                 {"lambda_st_star", sc.lambda_st_star}};
    return t;
}

Table cmd_strange_term(const RunConfig& c)
{
    LambdaStarEvaluator ev;
    if (c.evaluator == "closed_form")
        ev = closed_form_evaluator(c.n);
    else if (c.evaluator == "exterior_numeric")
        ev = exterior_numeric_evaluator(c.n, c.radius, c.intervals);
    else
        ev = cell_extrapolated_evaluator(c.eps, c.a.front(), c.level, c.n, cell_options(c));

    const auto results = parallel_map(c.beta.size(), c.threads, [&](std::size_t i) {
        return kappa_star(c.beta[i], ev, c.bracket_tol);
    });
    Table t;
    t.columns = {"beta", "kappa_star", "strange_term", "evaluator_id", "iterations", "bracket_width",
                 "residual", "strange_term_ball"};
    for (const auto& r : results)
        t.add({r.beta, r.kappa_star, r.strange_term, to_string(r.evaluator), r.iterations, r.bracket_width,
               r.residual, strange_term_ball(r.beta, c.n)});
    t.summary["evaluator_id"] = to_string(ev.id);
    t.summary["bracket_tol"] = c.bracket_tol > 0.0 ? c.bracket_tol : ev.default_tol;
    return t;
}

Table cmd_homogenize(const RunConfig& c, Artifacts& art)
{
    const double a = c.a.front();
    const Load load = sine_load(c.f_amplitude);
    struct Row {
        double eps, beta, mu, mu_h, energy, identity, l2, gamma_ms, trace, c_term;
        Index dofs;
        int iterations;
        std::string mesh_json;
        std::vector<std::pair<std::string, std::string>> matrices;
    };
    std::vector<std::pair<double, double>> jobs;
    for (double b : c.beta)
        for (double e : c.eps)
            jobs.emplace_back(b, e);
    for (double e : c.eps)
        cell_hole_radius(e, a, 3);

    const auto rows = parallel_map(jobs.size(), c.threads, [&](std::size_t i) {
        const auto [beta, eps] = jobs[i];
        const int N = cells_from_eps(eps);
        const double r = cell_hole_radius(eps, a, 3);
        auto cell = std::make_shared<const CellMesh>(build_cell_mesh(r, c.level, OuterMode::periodic));
        const FormSet cf = assemble_cell_forms(*cell);
        const PerforatedMesh pm = build_perforated_mesh(N, cell);
        const DomainForms df = assemble_domain_forms(pm);
        Row row{};
        row.eps = eps;
        row.beta = beta;
        row.mu = mu_coeff(eps, 3, r);
        row.mu_h = cf.s_h / eps;
        const FieldOnMesh u = solve_perforated(pm, df, c.alpha, beta, row.mu, load, c.linear_tol);
        row.energy = u.energy;
        row.identity = std::abs(u.energy + 0.5 * u.load_work) / std::max(std::abs(u.energy), 1e-300);
        row.l2 = l2_norm(u);
        row.gamma_ms = gamma_mean_square(u, df);
        row.trace = trace_ratio(u, df, row.mu);
        row.c_term = kappa_star(beta, closed_form_evaluator(3)).strange_term;
        row.dofs = static_cast<Index>(pm.nodes.size() - pm.outer_dirichlet_nodes.size());
        row.iterations = u.solve.iterations;
        if (i == 0 && !c.mesh_dump.empty()) {
            ordered_json mj = ordered_json::parse(mesh_to_json(pm));
            mj["fields"] = {{"u_eps", u.values}};
            row.mesh_json = mj.dump() + "\n";
        }
        if (i == 0 && !c.matrix_dump.empty()) {
            const LinearSystem sys = assemble_domain_system(pm, df, c.alpha, beta, row.mu, load.f);
            row.matrices.emplace_back("K", matrix_to_coordinate_text(sys.K));
            row.matrices.emplace_back("A", matrix_to_coordinate_text(df.A));
            row.matrices.emplace_back("M", matrix_to_coordinate_text(df.M));
            row.matrices.emplace_back("B", matrix_to_coordinate_text(df.B_gamma));
        }
        return row;
    });

    Table t;
    t.columns = {"eps", "beta", "dofs", "mu", "mu_h", "energy", "energy_identity_residual", "l2_norm",
                 "gamma_mean_square", "trace_ratio", "strange_term", "u0_amplitude", "u0_fem_relative_gap",
                 "cg_iterations"};
    std::map<double, double> fem_gap;
    for (const auto& r : rows) {
        const double amp = homogenized_amplitude(c.f_amplitude, c.alpha, r.c_term);
        double gap = std::numeric_limits<double>::quiet_NaN();
        if (c.grid > 0) {
            if (!fem_gap.count(r.beta)) {
                const FieldOnMesh fem = solve_homogenized(c.grid, c.alpha, r.c_term, load, HomogPath::fem, 1e-12);
                const FieldOnMesh cf = solve_homogenized(c.grid, c.alpha, r.c_term, load, HomogPath::closed_form);
                FieldOnMesh diff = fem;
                for (std::size_t i = 0; i < diff.values.size(); ++i)
                    diff.values[i] -= cf.values[i];
                fem_gap[r.beta] = l2_norm(diff) / l2_norm(cf);
            }
            gap = fem_gap[r.beta];
        }
        t.add({r.eps, r.beta, r.dofs, r.mu, r.mu_h, r.energy, r.identity, r.l2, r.gamma_ms, r.trace, r.c_term, amp,
               std::isnan(gap) ? ordered_json(nullptr) : ordered_json(gap), r.iterations});
    }
    if (!rows.empty()) {
        if (!c.mesh_dump.empty())
            art.files.emplace_back(c.mesh_dump, rows.front().mesh_json);
        for (const auto& [name, text] : rows.front().matrices)
            art.files.emplace_back(c.matrix_dump + "." + name + ".txt", text);
    }
    return t;
}

Table cmd_convergence(const RunConfig& c)
{
    ConvergenceOptions o;
    o.level = c.level;
    o.a = c.a.front();
    o.homog_grid = c.grid;
    o.cell = cell_options(c);
    o.linear_tol = std::min(c.linear_tol, 1e-10);
    std::vector<int> cells;
    for (double e : c.eps)
        cells.push_back(cells_from_eps(e));
    const Load load = sine_load(c.f_amplitude);

    Table t;
    t.columns = {"beta", "eps", "dofs", "l2_error", "h1_corrector_error", "eta", "mu", "rate_quotient", "mu_h",
                 "lambda", "lambda_over_eps2", "corrector_l2_gap", "corrector_residual", "energy", "failed",
                 "message"};
    ordered_json per_beta = ordered_json::array();
    for (double beta : c.beta) {
        const ConvergenceReport rep = convergence_study(cells, c.alpha, beta, load, o, c.threads);
        bool decreasing = true;
        double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const auto& r = rep.rows[i];
            t.add({beta, r.eps, r.dofs, r.l2_error, r.h1_corrector_error, r.eta, r.mu, r.rate_quotient, r.mu_h,
                   r.lambda, r.lambda / (r.eps * r.eps), r.corrector_l2_gap, r.corrector_residual, r.energy,
                   r.failed, r.message});
            if (r.failed)
                continue;
            if (i > 0 && !rep.rows[i - 1].failed && !(r.l2_error < rep.rows[i - 1].l2_error))
                decreasing = false;
            qmin = std::min(qmin, r.rate_quotient);
            qmax = std::max(qmax, r.rate_quotient);
        }
        per_beta.push_back({{"beta", beta},
                            {"kappa_star", rep.kappa_star},
                            {"strange_term", rep.strange_term},
                            {"l2_error_strictly_decreasing", decreasing},
                            {"rate_quotient_spread", qmax > 0.0 ? ordered_json(qmax / qmin) : ordered_json(nullptr)}});
    }
    t.summary["studies"] = std::move(per_beta);
    t.summary["note"] = "strict decrease of the L2 error at finite eps is an empirical check; "
                        "the convergence theorem gives only convergence to zero";
    return t;
}

Table cmd_regimes(const RunConfig& c)
{
    Table t;
    t.columns = {"a", "kappa", "eps", "r_cell", "lambda", "lambda_over_eps2", "ratio", "failed", "message"};
    ordered_json trends = ordered_json::array();
    for (double a : c.a)
        for (double k : c.kappa) {
            const RegimeReport rep = regime_sweep(a, c.eps, k, c.level, cell_options(c), c.threads);
            for (const auto& r : rep.rows)
                t.add({a, k, r.eps, r.r_cell, r.failed ? ordered_json(nullptr) : ordered_json(r.lambda),
                       r.failed ? ordered_json(nullptr) : ordered_json(r.scaled),
                       r.ratio ? ordered_json(*r.ratio) : ordered_json(nullptr), r.failed, r.message});
            trends.push_back({{"a", a},
                              {"kappa", k},
                              {"loglog_slope", std::isnan(rep.loglog_slope) ? ordered_json(nullptr)
                                                                             : ordered_json(rep.loglog_slope)},
                              {"local_slope", std::isnan(rep.local_slope) ? ordered_json(nullptr)
                                                                           : ordered_json(rep.local_slope)},
                              {"trend", to_string(rep.trend)}});
        }
    t.summary["trends"] = std::move(trends);
    return t;
}

int cmd_validate(const RunConfig& c, std::ostream& out, Table& t)
{
    acceptance::Options o;
    o.quick = c.quick;
    o.inject_constraint_sign_fault = c.inject_fault == "constraint-sign";
    o.threads = c.threads;
    const auto results = acceptance::run(o, [&](const acceptance::CriterionResult& r) {
        out << acceptance::format_line(r) << "\n";
        out.flush();
    });
    t.columns = {"criterion", "title", "status", "seconds", "budget_seconds", "detail"};
    int failed = 0;
    for (const auto& r : results) {
        const std::string status = r.skipped ? "skip" : (r.passed ? "pass" : "fail");
        if (!r.skipped && !r.passed)
            ++failed;
        t.add({r.id, r.title, status, r.seconds, r.budget_seconds, r.detail});
    }
    t.summary["failed"] = failed;
    out << (failed ? "validation FAILED: " + std::to_string(failed) + " criterion(s)" : std::string("validation passed"))
        << "\n";
    return failed ? exit_validation_failed : exit_ok;
}

} // namespace

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty())
            throw std::invalid_argument("empty entry in list '" + text + "'");
        const double v = parse_number(tok);
        if (!std::isfinite(v))
            throw std::invalid_argument("non-finite entry in list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw std::invalid_argument("empty list");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"robinhom: strange-term homogenization workbench"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", ROBINHOM_VERSION);

    std::map<std::string, CLI::App*> subs;
    std::map<std::string, std::map<std::string, std::pair<CLI::Option*, std::string>>> raw;
    std::map<std::string, std::string> config_paths;
    std::map<std::string, bool> flag_values;
    const std::map<std::string, std::string> descriptions{
        {"cell-spectrum", "cell eigenvalues, capacity and lambda(eps, kappa)"},
        {"exterior", "limiting exterior problem: closed form and radial oracle"},
        {"strange-term", "kappa_*(beta) and the strange term beta kappa_*(beta)"},
        {"homogenize", "solve the perforated Robin problem"},
        {"convergence", "convergence study of u_eps against u_0"},
        {"regimes", "lambda/eps^2 trends for hole scaling exponents"},
        {"validate", "run the acceptance suite"}};
    for (const auto& name : kSubcommands) {
        CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
        subs[name] = sub;
        sub->add_option("--config", config_paths[name], "JSON config file (flags take precedence)");
        for (const auto& f : fields()) {
            if (!f.subs.count(name))
                continue;
            auto& slot = raw[name][f.name];
            if (f.is_flag)
                slot.first = sub->add_flag("--" + f.name, flag_values[name + "/" + f.name], f.help);
            else
                slot.first = sub->add_option("--" + f.name, slot.second, f.help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << ROBINHOM_VERSION << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "robinhom: " << e.what() << "\n";
        return exit_config_error;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    RunConfig cfg = defaults_for(name);
    std::optional<double> seconds;
    try {
        nlohmann::json file_cfg = nlohmann::json::object();
        if (!config_paths[name].empty()) {
            std::ifstream f(config_paths[name]);
            require(static_cast<bool>(f), "cannot read config file '" + config_paths[name] + "'");
            try {
                file_cfg = nlohmann::json::parse(f);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
            }
            require(file_cfg.is_object(), "config file must hold a JSON object");
            for (const auto& [key, _] : file_cfg.items())
                require(raw[name].count(key) > 0, "unknown config key '" + key + "' for " + name);
        }
        for (const auto& f : fields()) {
            if (!f.subs.count(name))
                continue;
            const auto& [opt, text] = raw[name][f.name];
            try {
                if (opt->count() > 0)
                    f.set(cfg, f.is_flag ? std::string(flag_values[name + "/" + f.name] ? "true" : "false") : text);
                else if (file_cfg.contains(f.name))
                    f.set(cfg, json_to_text(file_cfg[f.name]));
                else
                    cfg.defaulted.push_back(f.name);
            } catch (const std::invalid_argument& e) {
                throw ConfigError("--" + f.name + ": " + e.what());
            }
        }
        validate(cfg);
        check_writable_dir(cfg.output);
        check_writable_dir(cfg.mesh_dump);
        check_writable_dir(cfg.matrix_dump);
    } catch (const ConfigError& e) {
        err << "robinhom: configuration error: " << e.what() << "\n";
        return exit_config_error;
    }

    Table table;
    Artifacts art;
    int code = exit_ok;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (name == "cell-spectrum")
            table = cmd_cell_spectrum(cfg, art);
        else if (name == "exterior")
            table = cmd_exterior(cfg);
        else if (name == "strange-term")
            table = cmd_strange_term(cfg);
        else if (name == "homogenize")
            table = cmd_homogenize(cfg, art);
        else if (name == "convergence")
            table = cmd_convergence(cfg);
        else if (name == "regimes")
            table = cmd_regimes(cfg);
        else
            code = cmd_validate(cfg, out, table);
    } catch (const ConfigError& e) {
        err << "robinhom: configuration error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const PreconditionError& e) {
        err << "robinhom: configuration error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const HoleTooLarge& e) {
        err << "robinhom: configuration error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const Error& e) {
        err << "robinhom: solver failure: " << e.what() << "\n";
        return exit_no_convergence;
    }
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    try {
        const std::string text = render(cfg, table, *seconds);
        if (!cfg.output.empty())
            write_file(cfg.output, text);
        else if (name != "validate")
            out << text;
        for (const auto& [path, content] : art.files)
            write_file(path, content);
    } catch (const ConfigError& e) {
        err << "robinhom: " << e.what() << "\n";
        return exit_config_error;
    }
    return code;
}

} // namespace robinhom::cli
