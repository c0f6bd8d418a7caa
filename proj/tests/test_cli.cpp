#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"

using namespace robinhom;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "robinhom");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path tmpdir()
{
    const fs::path p = fs::path(ROBINHOM_TEST_TMPDIR);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p);
    return {std::istreambuf_iterator<char>(f), {}};
}

} // namespace

TEST_CASE("parse_list")
{
    const auto v = cli::parse_list("0.5, 1/3,0.25");
    REQUIRE(v.size() == 3);
    CHECK(v[0] == 0.5);
    CHECK(v[1] == 1.0 / 3.0);
    CHECK(v[2] == 0.25);
    CHECK_THROWS_AS(cli::parse_list("1/0"), std::invalid_argument);
    CHECK_THROWS_AS(cli::parse_list("abc"), std::invalid_argument);
    CHECK_THROWS_AS(cli::parse_list("1,,2"), std::invalid_argument);
}

TEST_CASE("strange-term and exterior values")
{
    const Run r = run({"strange-term", "--beta", "12.566370614"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(r.out);
    CHECK(j.at("schema") == "robinhom-result");
    const json& row = j.at("rows").at(0);
    CHECK(std::abs(row.at("kappa_star").get<double>() - 0.5) <= 1e-9);
    CHECK(std::abs(row.at("strange_term").get<double>() - 2 * kPi) <= 1e-8);
    CHECK(row.at("evaluator_id") == "closed_form");

    const Run e = run({"exterior", "--kappa", "2", "--format", "csv"});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    CHECK(e.out.find("6.283185") != std::string::npos);
    CHECK(e.out.find("kappa,n,lambda_star,lambda_star_numeric") != std::string::npos);
}

TEST_CASE("configuration errors exit 2 before any output")
{
    const fs::path out = tmpdir() / "never.json";
    fs::remove(out);
    CHECK(run({"exterior", "--bogus", "1", "--output", out.string()}).code == 2);
    CHECK_FALSE(fs::exists(out));
    CHECK(run({"cell-spectrum", "--eps", "1/2,1/2"}).code == 2);
    CHECK(run({"cell-spectrum", "--eps", "0"}).code == 2);
    CHECK(run({"cell-spectrum", "--kappa", "1"}).code == 2);
    CHECK(run({"strange-term", "--beta", "-1"}).code == 2);
    CHECK(run({"exterior", "--format", "xml"}).code == 2);
    CHECK(run({"homogenize", "--eps", "0.3"}).code == 2);
    CHECK(run({"cell-spectrum", "--eps", "1/2", "--a", "2"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"exterior", "--output", (tmpdir() / "no_such_dir" / "x.json").string()}).code == 2);
}

TEST_CASE("non-convergence exits 3")
{
    CHECK(run({"cell-spectrum", "--eps", "1/2", "--kappa", "2", "--level", "1", "--eig-tol", "1e-30"}).code == 3);
}

TEST_CASE("help and version exit 0")
{
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
}

TEST_CASE("config file precedence")
{
    const fs::path cfg = tmpdir() / "cfg.json";
    {
        std::ofstream f(cfg);
        f << R"({"kappa": [3.0], "radius": 200})";
    }
    const Run r = run({"exterior", "--config", cfg.string(), "--kappa", "2"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(r.out);
    CHECK(j.at("config").at("kappa").at(0) == 2.0);
    CHECK(j.at("config").at("radius") == 200.0);
    CHECK(j.at("rows").at(0).at("radius") == 200.0);
    const auto defaulted = j.at("config").at("defaulted").get<std::vector<std::string>>();
    CHECK(std::find(defaulted.begin(), defaulted.end(), "intervals") != defaulted.end());
    CHECK(std::find(defaulted.begin(), defaulted.end(), "kappa") == defaulted.end());
    CHECK(std::find(defaulted.begin(), defaulted.end(), "radius") == defaulted.end());

    const fs::path bad = tmpdir() / "bad.json";
    {
        std::ofstream f(bad);
        f << R"({"kapa": 2})";
    }
    CHECK(run({"exterior", "--config", bad.string()}).code == 2);
    CHECK(run({"exterior", "--config", (tmpdir() / "missing.json").string()}).code == 2);
}

TEST_CASE("csv output and dumps")
{
    const fs::path dir = tmpdir();
    const fs::path out = dir / "cs.csv";
    const fs::path mesh = dir / "mesh.json";
    const std::string mat = (dir / "mat").string();
    const Run r = run({"cell-spectrum", "--eps", "1/2", "--kappa", "2", "--level", "1", "--format", "csv",
                       "--output", out.string(), "--mesh-dump", mesh.string(), "--matrix-dump", mat});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string csv = slurp(out);
    CHECK(csv.rfind("# robinhom-result", 0) == 0);
    CHECK(csv.find("\neps,kappa,lambda,lambda_over_eps2") != std::string::npos);
    const json m = json::parse(slurp(mesh));
    CHECK(m.at("nodes").size() == 104);
    for (const char* name : {"A", "M", "B"})
        CHECK(fs::file_size(mat + "." + name + ".txt") > 0);

    const fs::path hmesh = dir / "hmesh.json";
    const Run h = run({"homogenize", "--eps", "1/2", "--level", "1", "--mesh-dump", hmesh.string(),
                       "--matrix-dump", mat + "_h"});
    REQUIRE_MESSAGE(h.code == 0, h.err);
    const json hm = json::parse(slurp(hmesh));
    CHECK(hm.at("fields").at("u_eps").size() == hm.at("nodes").size());
    CHECK(fs::exists(mat + "_h.K.txt"));
}

TEST_CASE("validate --quick and fault injection")
{
    const Run ok = run({"validate", "--quick"});
    CHECK_MESSAGE(ok.code == 0, ok.out);
    const Run bad = run({"validate", "--quick", "--inject-fault", "constraint-sign", "--format", "csv"});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL") != std::string::npos);
    CHECK(run({"validate", "--inject-fault", "nonsense"}).code == 2);
}
