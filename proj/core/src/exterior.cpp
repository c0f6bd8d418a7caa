#include "robinhom/exterior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "robinhom/cellmesh.hpp"
#include "robinhom/error.hpp"

namespace robinhom {

double lambda_star_ball(double kappa, int n)
{
    if (!(kappa > 0.0))
        throw PreconditionError("lambda_star_ball: kappa must be positive");
    if (n < 3)
        throw PreconditionError("lambda_star_ball: n must be >= 3");
    if (kappa == 1.0)
        return 0.0;
    return unit_sphere_area(n) * (n - 2) * (kappa - 1.0) / kappa;
}

StarConstants star_constants(int n)
{
    if (n < 3)
        throw PreconditionError("star_constants: n must be >= 3");
    StarConstants c;
    c.n = n;
    c.sigma_n = unit_sphere_area(n);
    c.cap_star = (n - 2) * c.sigma_n;
    c.lambda_dir_star = c.cap_star;
    c.lambda_st_star = c.cap_star;
    return c;
}

double RadialGrid::node(int i) const
{
    if (i <= 0)
        return 1.0;
    if (i >= intervals)
        return radius;
    if (ratio == 1.0)
        return 1.0 + (radius - 1.0) * i / intervals;
    return 1.0 + (radius - 1.0) * (std::pow(ratio, i) - 1.0) / (std::pow(ratio, intervals) - 1.0);
}

RadialGrid make_radial_grid(double R, int m)
{
    if (!(R > 1.0) || m < 8)
        throw PreconditionError("make_radial_grid: need R > 1 and m >= 8");
    RadialGrid g;
    g.radius = R;
    g.intervals = m;
    // With x = q^{m/2}: rho_{m/2} = 1 + (R-1)/(x+1) = T.
    const double T = std::min(10.0, std::sqrt(R));
    const double x = (R - 1.0) / (T - 1.0) - 1.0;
    g.ratio = x > 1.0 ? std::pow(x, 2.0 / m) : 1.0;
    return g;
}

namespace {

// Discrete harmonic radial profile with z(1) = z0, z(R) = zm.
std::vector<double> harmonic_profile(const std::vector<double>& k, double z0, double zm)
{
    const std::size_t m = k.size();
    std::vector<double> z(m + 1, 0.0);
    z[0] = z0;
    z[m] = zm;
    if (m < 2)
        return z;
    // Interior rows: -k_{i-1} z_{i-1} + (k_{i-1} + k_i) z_i - k_i z_{i+1} = 0.
    const std::size_t ni = m - 1;
    std::vector<double> diag(ni), upper(ni), rhs(ni, 0.0);
    for (std::size_t j = 0; j < ni; ++j) {
        const std::size_t i = j + 1;
        diag[j] = k[i - 1] + k[i];
        upper[j] = -k[i];
    }
    rhs[0] += k[0] * z0;
    rhs[ni - 1] += k[m - 1] * zm;
    // Thomas algorithm
    for (std::size_t j = 1; j < ni; ++j) {
        const double w = upper[j - 1] / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    z[ni] = rhs[ni - 1] / diag[ni - 1];
    for (std::size_t j = ni - 1; j-- > 0;)
        z[j + 1] = (rhs[j] - upper[j] * z[j + 2]) / diag[j];
    return z;
}

double energy(const std::vector<double>& k, const std::vector<double>& x, const std::vector<double>& y)
{
    double e = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        e += k[i] * (x[i + 1] - x[i]) * (y[i + 1] - y[i]);
    return e;
}

} // namespace

ExteriorDetail exterior_numeric_detail(double kappa, int n, double R, int m)
{
    if (!(kappa > 0.0))
        throw PreconditionError("exterior_numeric: kappa must be positive");
    ExteriorDetail d;
    if (kappa == 1.0)
        return d;
    const RadialGrid grid = make_radial_grid(R, m);
    const double sigma = unit_sphere_area(n);

    // Exact element stiffness for linear z: sigma (b^n - a^n) / (n (b-a)^2).
    std::vector<double> k(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double a = grid.node(i), b = grid.node(i + 1);
        k[i] = sigma * (std::pow(b, n) - std::pow(a, n)) / (n * (b - a) * (b - a));
    }
    const auto za = harmonic_profile(k, 1.0, 0.0);
    const auto zb = harmonic_profile(k, 0.0, 1.0);
    d.energy_aa = energy(k, za, za);
    d.energy_ab = energy(k, za, zb);
    d.energy_bb = energy(k, zb, zb);

    // det(E - lambda C) = 0 with C = diag(1, -kappa).
    const double a2 = -kappa;
    const double a1 = kappa * d.energy_aa - d.energy_bb;
    const double a0 = d.energy_aa * d.energy_bb - d.energy_ab * d.energy_ab;
    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc < 0.0)
        throw ConstraintInfeasible("exterior_numeric: complex constraint roots");
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (a1 + std::copysign(sq, a1));
    std::array<double, 2> roots{q / a2, q != 0.0 ? a0 / q : 0.0};

    const double want = kappa > 1.0 ? 1.0 : -1.0;
    bool found = false;
    double best_energy = 0.0;
    for (const double lam : roots) {
        double x1 = d.energy_ab, x2 = lam - d.energy_aa;
        if (std::hypot(x1, x2) < 1e-14 * (std::abs(d.energy_aa) + std::abs(lam))) {
            x1 = d.energy_bb + kappa * lam;
            x2 = -d.energy_ab;
        }
        const double c = x1 * x1 - kappa * x2 * x2;
        if (c * want <= 0.0)
            continue;
        const double s = 1.0 / std::sqrt(std::abs(c));
        const double e = lam * want;  // energy of the normalised vector
        if (!found || e < best_energy) {
            found = true;
            best_energy = e;
            d.lambda = lam;
            d.z_hole = x1 * s;
            d.z_far = x2 * s;
        }
    }
    if (!found)
        throw ConstraintInfeasible("exterior_numeric: no admissible root for kappa = " +
                                   std::to_string(kappa));
    return d;
}

double exterior_numeric(double kappa, int n, double R, int m)
{
    return exterior_numeric_detail(kappa, n, R, m).lambda;
}

} // namespace robinhom
