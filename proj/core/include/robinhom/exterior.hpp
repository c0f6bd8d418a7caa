#pragma once

// Limiting exterior problems on R^n minus the unit ball: closed forms and a
// truncated radial finite-element oracle.

namespace robinhom {

/// sigma_n (n-2) (kappa-1)/kappa; zero at kappa = 1.
double lambda_star_ball(double kappa, int n);

struct StarConstants {
    int n = 3;
    double sigma_n = 0.0;
    double cap_star = 0.0;
    double lambda_dir_star = 0.0;
    double lambda_st_star = 0.0;
};

/// For the ball all three limits equal (n-2) sigma_n.
StarConstants star_constants(int n);

/// Radial grid 1 = rho_0 < ... < rho_m = R, geometric with half the points in
/// [1, min(10, sqrt R)].
struct RadialGrid {
    double ratio = 1.0;
    int intervals = 0;
    double radius = 0.0;
    double node(int i) const;
};
RadialGrid make_radial_grid(double R, int m);

struct ExteriorDetail {
    double lambda = 0.0;
    double energy_aa = 0.0;  ///< energy of the harmonic with data (1, 0)
    double energy_ab = 0.0;
    double energy_bb = 0.0;
    double z_hole = 0.0;     ///< minimiser value on the sphere
    double z_far = 0.0;      ///< minimiser value at rho = R
};

/// Minimises sigma_n int_1^R z'^2 rho^{n-1} over piecewise-linear radial z
/// subject to z(1)^2 - kappa z(R)^2 = sign(kappa - 1). Returns the signed
/// minimum (positive for kappa > 1, negative for kappa < 1), 0 at kappa = 1.
double exterior_numeric(double kappa, int n, double R, int m);
ExteriorDetail exterior_numeric_detail(double kappa, int n, double R, int m);

} // namespace robinhom
