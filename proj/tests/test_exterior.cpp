#include <doctest.h>

#include <cmath>
#include <numbers>

#include "robinhom/cellmesh.hpp"
#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"
#include "test_support.hpp"

using namespace robinhom;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact minimiser over radial harmonics z = p + q/rho on (1, R) in n = 3:
// energy 4 pi (a - b)^2 / (1 - 1/R) for z(1) = a, z(R) = b; the pencil
// [[c,-c],[-c,c]] w = lambda diag(1, -kappa) w has the nonzero root
// c (kappa - 1) / kappa.
double truncated_oracle(double kappa, double R)
{
    const double c = 4 * kPi / (1.0 - 1.0 / R);
    return c * (kappa - 1.0) / kappa;
}

} // namespace

TEST_CASE("lambda_star_ball closed form")
{
    CHECK(lambda_star_ball(2.0, 3) == doctest::Approx(2 * kPi).epsilon(1e-15));
    CHECK(lambda_star_ball(1.0, 3) == 0.0);
    CHECK(lambda_star_ball(0.5, 3) == doctest::Approx(-4 * kPi).epsilon(1e-15));
    CHECK(lambda_star_ball(2.0, 4) == doctest::Approx(2 * kPi * kPi).epsilon(1e-15));
    CHECK_THROWS_AS(lambda_star_ball(0.0, 3), PreconditionError);
    CHECK_THROWS_AS(lambda_star_ball(1.0, 2), PreconditionError);

    for (int n : {3, 4, 5}) {
        const double s = unit_sphere_area(n);
        for (double k : {0.01, 0.3, 1.7, 25.0})
            CHECK(lambda_star_ball(k, n) == s * (n - 2) * (k - 1.0) / k);
    }
}

TEST_CASE("lambda_star_ball is increasing with the right limits")
{
    double prev = -INFINITY;
    for (double k = 0.05; k < 20.0; k *= 1.3) {
        const double v = lambda_star_ball(k, 3);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(1e-9 * lambda_star_ball(1e-9, 3) == doctest::Approx(-4 * kPi).epsilon(1e-8));
    CHECK(lambda_star_ball(1e12, 3) == doctest::Approx(4 * kPi).epsilon(1e-10));
}

TEST_CASE("star constants")
{
    const StarConstants s3 = star_constants(3);
    CHECK(s3.sigma_n == doctest::Approx(4 * kPi));
    CHECK(s3.cap_star == doctest::Approx(4 * kPi));
    CHECK(s3.lambda_dir_star == s3.cap_star);
    CHECK(s3.lambda_st_star == s3.cap_star);
    CHECK(s3.lambda_st_star == doctest::Approx(lambda_star_ball(1e14, 3)).epsilon(1e-12));
    const StarConstants s4 = star_constants(4);
    CHECK(s4.cap_star == doctest::Approx(4 * kPi * kPi).epsilon(1e-15));
    CHECK_THROWS_AS(star_constants(2), PreconditionError);
}

TEST_CASE("exterior_numeric against the closed form")
{
    CHECK(rel_err(exterior_numeric(2.0, 3, 1000.0, 512), 2 * kPi) <= 2e-3);
    CHECK(rel_err(exterior_numeric(0.5, 3, 1000.0, 512), -4 * kPi) <= 2e-3);
}

TEST_CASE("exterior_numeric against the exact truncated problem")
{
    for (double R : {10.0, 100.0, 1000.0})
        for (double k : {0.5, 2.0, 5.0})
            CHECK(rel_err(exterior_numeric(k, 3, R, 512), truncated_oracle(k, R)) <= 1e-4);
}

TEST_CASE("exterior_numeric truncation error decreases with R")
{
    for (double k : {0.5, 2.0}) {
        double prev = INFINITY;
        for (double R : {10.0, 100.0, 1000.0}) {
            const double e = std::abs(exterior_numeric(k, 3, R, 512) - lambda_star_ball(k, 3));
            CHECK(e < prev);
            prev = e;
        }
    }
}

TEST_CASE("exterior_numeric is increasing in kappa")
{
    double prev = -INFINITY;
    for (double k : {0.2, 0.5, 0.9, 1.1, 2.0, 4.0}) {
        const double v = exterior_numeric(k, 3, 500.0, 256);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(exterior_numeric(1.0, 3, 500.0, 256) == 0.0);
}

TEST_CASE("exterior_numeric detail and preconditions")
{
    const ExteriorDetail d = exterior_numeric_detail(2.0, 3, 1000.0, 512);
    CHECK(d.lambda == exterior_numeric(2.0, 3, 1000.0, 512));
    CHECK(d.z_hole * d.z_hole - 2.0 * d.z_far * d.z_far == doctest::Approx(1.0));
    CHECK(d.energy_aa > 0.0);
    CHECK_THROWS_AS(exterior_numeric(2.0, 3, 1.0, 512), PreconditionError);
    CHECK_THROWS_AS(exterior_numeric(2.0, 3, 100.0, 4), PreconditionError);

    const RadialGrid g = make_radial_grid(1000.0, 512);
    CHECK(g.intervals == 512);
    CHECK(g.radius == 1000.0);
    CHECK(g.ratio > 1.0);
}
