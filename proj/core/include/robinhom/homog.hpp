#pragma once

// Perforated Robin problem, homogenized problem, corrector, convergence and
// regime studies.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robinhom/assembly.hpp"
#include "robinhom/cellmesh.hpp"
#include "robinhom/cellspec.hpp"
#include "robinhom/numkernel.hpp"

namespace robinhom {

/// Plain hexahedral mesh with Dirichlet flags; shared by fields.
struct HexMesh {
    std::vector<Vec3> nodes;
    std::vector<HexCell> hexes;
    std::vector<std::uint8_t> is_dirichlet;
};

/// Copies the geometry of a perforated mesh.
std::shared_ptr<const HexMesh> as_hex_mesh(const PerforatedMesh& pmesh);

/// Uniform grid of grid_n^3 hexes on (0,1)^3 with Dirichlet boundary flags.
std::shared_ptr<const HexMesh> unit_cube_grid(int grid_n);

enum class FieldKind { u_eps, u_0, corrector };
std::string to_string(FieldKind k);

struct FieldOnMesh {
    FieldKind kind = FieldKind::u_eps;
    std::shared_ptr<const HexMesh> mesh;
    Vector values;                 ///< nodal, zero on Dirichlet nodes
    double energy = 0.0;           ///< discrete energy functional, when solved
    double load_work = 0.0;        ///< F^T u, so that energy = -load_work / 2 at the solution
    SolveReport solve;
};

/// Source term. A set sine_amplitude declares f = amp * prod sin(pi x_i),
/// which enables closed-form reference solutions.
struct Load {
    ScalarField f;
    std::optional<double> sine_amplitude;
};
Load sine_load(double amplitude);
Load zero_load();
Load custom_load(ScalarField f);

/// Closed-form amplitude amp / (3 pi^2 + alpha + c).
double homogenized_amplitude(double sine_amplitude, double alpha, double c);

enum class HomogPath { fem, closed_form };

/// Solves -Delta u + (alpha + c) u = f on (0,1)^3, u = 0 on the boundary.
/// The closed-form path needs a sine load and returns its nodal values.
FieldOnMesh solve_homogenized(int grid_n, double alpha, double c, const Load& load,
                              HomogPath path = HomogPath::fem, double tol = 1e-10);

/// Solves the Robin problem on the perforated mesh with CG. The field
/// carries the energy 1/2 u^T K u - F^T u.
FieldOnMesh solve_perforated(const PerforatedMesh& pmesh, const DomainForms& forms, double alpha,
                             double beta, double mu, const Load& load, double tol = 1e-10);
FieldOnMesh solve_perforated(const PerforatedMesh& pmesh, double alpha, double beta, double mu,
                             const Load& load, double tol = 1e-10);

/// Periodic tiling of v / (1^T M v). `cell` and `cell_forms` are the
/// periodic cell the eigenvector lives on; throws MeshMismatch if pmesh was
/// built from a different template.
FieldOnMesh build_corrector(const CellMesh& cell, const FormSet& cell_forms, const Vector& v,
                            const PerforatedMesh& pmesh);

/// Normalisation constant 1^T M v.
double corrector_mass(const FormSet& cell_forms, const Vector& v);

/// Relative residual of A w + (kappa lambda/eps^2) M w - lambda/(eps^2 mu) B w
/// over non-Dirichlet nodes, relative to ||A w|| on those nodes.
double corrector_residual(const FieldOnMesh& w, const PerforatedMesh& pmesh,
                          const DomainForms& forms, double kappa, double lambda, double mu);

/// (1/mu) int_Gamma u^2 / (||grad u||^2 + ||u||^2).
double trace_ratio(const FieldOnMesh& u, const DomainForms& forms, double mu);

/// Mean of u^2 over Gamma_eps: u^T B u / 1^T B 1.
double gamma_mean_square(const FieldOnMesh& u, const DomainForms& forms);

/// L2 norm over the field's mesh.
double l2_norm(const FieldOnMesh& u);

struct ConvergenceOptions {
    int level = 2;
    double a = 3.0;                 ///< hole radius eps^(a-1)
    int homog_grid = 0;             ///< > 0 forces a FEM reference on that grid
    CellSolveOptions cell;
    double linear_tol = 1e-10;
};

struct ConvergenceRow {
    double eps = 0.0;
    Index dofs = 0;
    double l2_error = 0.0;
    double h1_corrector_error = 0.0;
    double eta = 0.0;
    double mu = 0.0;                ///< continuum mu_eps, used in the solve
    double mu_h = 0.0;              ///< discrete s_h / eps, used by the corrector residual
    double lambda = 0.0;            ///< lambda(eps, kappa_*)
    double rate_quotient = 0.0;
    double corrector_l2_gap = 0.0;  ///< ||w - 1||_{L2(Omega_eps)}
    double corrector_residual = 0.0;
    double energy = 0.0;
    bool failed = false;
    std::string message;
};

struct ConvergenceReport {
    double alpha = 0.0;
    double beta = 0.0;
    double kappa_star = 0.0;
    double strange_term = 0.0;
    std::vector<ConvergenceRow> rows;  ///< decreasing eps
};

/// Runs the full pipeline for each N in cells_per_side (eps = 1/N).
/// Rows are computed independently; a failing row is flagged, not fatal.
ConvergenceReport convergence_study(const std::vector<int>& cells_per_side, double alpha,
                                    double beta, const Load& load,
                                    const ConvergenceOptions& opts = {}, int threads = 1);

enum class Trend { decreasing, increasing, settling, undetermined };
std::string to_string(Trend t);

struct RegimeRow {
    double eps = 0.0;
    double r_cell = 0.0;
    double lambda = 0.0;
    double scaled = 0.0;            ///< lambda / eps^2
    std::optional<double> ratio;    ///< scaled / previous scaled
    bool failed = false;
    std::string message;
};

struct RegimeReport {
    double a = 0.0;
    double kappa = 0.0;
    int level = 0;
    std::vector<RegimeRow> rows;
    double loglog_slope = 0.0;      ///< least-squares d log|scaled| / d log eps; NaN if < 2 rows
    double local_slope = 0.0;       ///< same over the two finest successful rows
    Trend trend = Trend::undetermined;
};

/// lambda(eps, kappa)/eps^2 with r_cell = eps^(a-1) over decreasing eps.
/// Trend from the local slope: > 0.5 decreasing, < -0.5 increasing, else
/// settling.
RegimeReport regime_sweep(double a, const std::vector<double>& eps_list, double kappa, int level,
                          const CellSolveOptions& opts = {}, int threads = 1);

} // namespace robinhom
