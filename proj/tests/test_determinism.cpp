#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "robinhom/homog.hpp"
#include "robinhom/parallel.hpp"

using namespace robinhom;

namespace {

constexpr double kPi = std::numbers::pi;

nlohmann::json run_rows(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    REQUIRE_MESSAGE(code == 0, err.str());
    return nlohmann::json::parse(out.str()).at("rows");
}

} // namespace

TEST_CASE("parallel_map keeps index order")
{
    for (int threads : {1, 2, 3, 8}) {
        const auto v = parallel_map(17, threads, [](std::size_t i) { return static_cast<int>(i * i); });
        REQUIRE(v.size() == 17);
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(v[i] == static_cast<int>(i * i));
    }
    CHECK(parallel_map(0, 4, [](std::size_t) { return 1; }).empty());
}

TEST_CASE("convergence study is bitwise identical across thread counts")
{
    ConvergenceOptions o;
    o.level = 1;
    const Load f = sine_load(3 * kPi * kPi + 2 * kPi);
    const ConvergenceReport a = convergence_study({2, 3}, 0.0, 4 * kPi, f, o, 1);
    const ConvergenceReport b = convergence_study({2, 3}, 0.0, 4 * kPi, f, o, 2);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].l2_error == b.rows[i].l2_error);
        CHECK(a.rows[i].h1_corrector_error == b.rows[i].h1_corrector_error);
        CHECK(a.rows[i].lambda == b.rows[i].lambda);
        CHECK(a.rows[i].energy == b.rows[i].energy);
    }
}

TEST_CASE("regime sweep is bitwise identical across thread counts")
{
    const RegimeReport a = regime_sweep(3.0, {0.5, 1.0 / 3.0, 0.25}, 2.0, 1, {}, 1);
    const RegimeReport b = regime_sweep(3.0, {0.5, 1.0 / 3.0, 0.25}, 2.0, 1, {}, 3);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i)
        CHECK(a.rows[i].lambda == b.rows[i].lambda);
    CHECK(a.local_slope == b.local_slope);
}

TEST_CASE("CLI rows do not depend on --threads")
{
    const std::vector<std::string> base = {"robinhom", "cell-spectrum", "--eps", "1/2,1/3", "--kappa", "2",
                                           "--level", "1"};
    auto one = base, two = base;
    one.insert(one.end(), {"--threads", "1"});
    two.insert(two.end(), {"--threads", "2"});
    CHECK(run_rows(one) == run_rows(two));
}
