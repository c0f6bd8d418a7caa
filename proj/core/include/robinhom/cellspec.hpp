#pragma once

// Cell quantities on the perforated torus / cube: the Dirichlet eigenvalue,
// the Steklov eigenvalue, the condenser capacity and the signed eigenvalue
// lambda(eps, kappa) of the pencil A v = lambda (B/s_h - kappa M) v.

#include <optional>
#include <string>
#include <vector>

#include "robinhom/assembly.hpp"
#include "robinhom/cellmesh.hpp"
#include "robinhom/numkernel.hpp"
#include "robinhom/strangeterm.hpp"

namespace robinhom {

struct CellSolveOptions {
    double eig_tol = 1e-9;
    double linear_tol = 1e-11;
    int max_iter = 2000;
    int max_retries = 8;
    /// Validator fault injection: flips the sign of the bulk term of the
    /// constraint form. Never set outside fault-injection runs.
    bool inject_constraint_sign_fault = false;
};

/// An eigenfunction or potential on the cell, in dof numbering of its FormSet.
struct CellField {
    double value = 0.0;
    Vector dofs;
    double residual = 0.0;
    int iterations = 0;
    bool sign_definite = false;
};

/// Lambda^Dir: periodic mesh, hole dofs fixed at 0, pencil (A, M).
/// phi is M-normalised and positive.
CellField lambda_dir(const CellMesh& mesh, const FormSet& forms, const CellSolveOptions& opts = {});

/// Lambda^St: outer dofs fixed at 0, pencil (A, B/s_h); psi^T (B/s_h) psi = 1.
CellField lambda_st(const CellMesh& mesh, const FormSet& forms, const CellSolveOptions& opts = {});

struct CapacityResult {
    double cap = 0.0;
    Vector zeta;  ///< dofs; 0 on the hole, 1 on dY
    double zeta_min = 0.0;
    double zeta_max = 0.0;
    int iterations = 0;
};

/// Condenser capacity zeta^T A zeta of the discrete harmonic zeta.
CapacityResult capacity(const CellMesh& mesh, const FormSet& forms, const CellSolveOptions& opts = {});

struct KappaEigen {
    double kappa = 0.0;
    double lambda = 0.0;
    Vector dofs;                  ///< |v^T G v| = 1, positive
    double constraint_value = 0;  ///< v^T G v, sign(kappa - 1)
    double residual = 0.0;        ///< pencil residual
    double rayleigh_residual = 0.0;  ///< |v^T A v - lambda v^T G v| / v^T A v
    double bdav_residual = 0.0;   ///< |avg_dH v - kappa int v| / ||v||_{L2}
    double integral = 0.0;        ///< int_{T \ H} v = 1^T M v
    double boundary_average = 0.0;
    bool sign_definite = false;
    int iterations = 0;
    int retries = 0;
    double shift = 0.0;           ///< shift of the accepted run
};

/// Signed eigenvalue lambda(eps, kappa) on a periodic mesh. Accepts only a
/// sign-definite eigenvector whose constraint value has the sign of kappa-1;
/// otherwise retries with the shift halved/doubled and finally throws
/// WrongBranch. Requires kappa != 1 and, for kappa > 1, kappa vol_h > 1.
KappaEigen lambda_eps_kappa(const CellMesh& mesh, const FormSet& forms, double kappa,
                            double shift_guess, const CellSolveOptions& opts = {});

/// Shift guess r_cell * lambda_*^ball(kappa) (equal to eps^2 lambda_* in the
/// critical scaling).
double default_shift(double r_cell, double kappa, int n = 3);

struct ExtrapolationResult {
    std::vector<double> eps;
    std::vector<double> scaled;  ///< value / eps^2
    double limit = 0.0;          ///< Richardson, O(eps) error model, two finest samples
    double limit_polynomial = 0.0;  ///< full Neville table in powers of eps
    double fitted_order = 0.0;   ///< NaN when not determinable
    double uncertainty = 0.0;    ///< change of the Richardson estimate between the last two pairs
    bool non_monotone = false;
};

/// Extrapolates value/eps^2 to eps -> 0 from samples with decreasing eps.
ExtrapolationResult extrapolate_star(const std::vector<std::pair<double, double>>& samples);

/// Everything computed for one eps: both meshes, both form sets and the four
/// cell quantities.
struct CellSpectrum {
    double eps = 0.0;
    double r_cell = 0.0;
    int level = 0;
    std::optional<double> kappa;
    double lambda_dir = 0.0;
    double lambda_st = 0.0;
    double cap = 0.0;
    std::optional<KappaEigen> eig;
    double vol_h = 0.0;
    double s_h = 0.0;

    double lambda_dir_scaled() const { return lambda_dir / (eps * eps); }
    double lambda_st_scaled() const { return lambda_st / (eps * eps); }
    double cap_scaled() const { return cap / (eps * eps); }
};

CellSpectrum compute_cell_spectrum(double eps, double r_cell, int level, std::optional<double> kappa,
                                   const CellSolveOptions& opts = {});

/// lambda_* estimated from finite-eps cell runs and extrapolate_star; the
/// default bracket tolerance is widened to the extrapolation uncertainty
/// measured at kappa = 1/2.
LambdaStarEvaluator cell_extrapolated_evaluator(std::vector<double> eps_list, double a, int level,
                                                int n = 3, const CellSolveOptions& opts = {});

} // namespace robinhom
