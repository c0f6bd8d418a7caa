#include "robinhom/cellspec.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"

namespace robinhom {

namespace {

EigenOptions eigen_options(const CellSolveOptions& opts)
{
    EigenOptions e;
    e.tol = opts.eig_tol;
    e.linear_tol = opts.linear_tol;
    e.max_iter = opts.max_iter;
    return e;
}

Vector scatter(std::span<const double> values, std::span<const Index> dofs, Index n)
{
    Vector out(static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < dofs.size(); ++k)
        out[dofs[k]] = values[k];
    return out;
}

} // namespace

CellField lambda_dir(const CellMesh& mesh, const FormSet& forms, const CellSolveOptions& opts)
{
    if (mesh.outer_mode != OuterMode::periodic)
        throw PreconditionError("lambda_dir: requires a periodic cell mesh");
    const auto free = forms.dofs_without(forms.hole_dof);
    const SparseSym A = forms.A.restrict_to(free);
    const SparseSym M = forms.M.restrict_to(free);
    const EigenPair ep = inverse_power(A, M, eigen_options(opts));
    return {ep.lambda, scatter(ep.vector, free, forms.num_dofs()), ep.residual, ep.iterations,
            ep.sign_definite};
}

CellField lambda_st(const CellMesh& mesh, const FormSet& forms, const CellSolveOptions& opts)
{
    if (mesh.outer_mode != OuterMode::dirichlet_outer)
        throw PreconditionError("lambda_st: requires a dirichlet_outer cell mesh");
    const auto free = forms.dofs_without(forms.outer_dof);
    const SparseSym A = forms.A.restrict_to(free);
    SparseSym Bs = forms.B.restrict_to(free);
    scale(1.0 / forms.s_h, Bs.values());
    const EigenPair ep = inverse_power(A, Bs, eigen_options(opts));
    return {ep.lambda, scatter(ep.vector, free, forms.num_dofs()), ep.residual, ep.iterations,
            ep.sign_definite};
}

CapacityResult capacity(const CellMesh& mesh, const FormSet& forms, const CellSolveOptions& opts)
{
    if (mesh.outer_mode != OuterMode::dirichlet_outer)
        throw PreconditionError("capacity: requires a dirichlet_outer cell mesh");
    const Index n = forms.num_dofs();
    std::vector<std::uint8_t> fixed(static_cast<std::size_t>(n), 0);
    Vector lift(static_cast<std::size_t>(n), 0.0);
    for (Index d = 0; d < n; ++d) {
        if (forms.outer_dof[d]) {
            fixed[d] = 1;
            lift[d] = 1.0;
        }
        if (forms.hole_dof[d])
            fixed[d] = 1;
    }
    const auto free = forms.dofs_without(fixed);
    const Vector a_lift = forms.A * lift;
    Vector rhs(free.size());
    for (std::size_t k = 0; k < free.size(); ++k)
        rhs[k] = -a_lift[free[k]];
    SolveReport rep;
    const Vector zf = cg_solve(forms.A.restrict_to(free), rhs, opts.linear_tol, &rep);

    CapacityResult out;
    out.zeta = lift;
    for (std::size_t k = 0; k < free.size(); ++k)
        out.zeta[free[k]] = zf[k];
    out.cap = forms.A.quad_form(out.zeta);
    out.zeta_min = *std::min_element(out.zeta.begin(), out.zeta.end());
    out.zeta_max = *std::max_element(out.zeta.begin(), out.zeta.end());
    out.iterations = rep.iterations;
    return out;
}

double default_shift(double r_cell, double kappa, int n)
{
    return r_cell * lambda_star_ball(kappa, n);
}

KappaEigen lambda_eps_kappa(const CellMesh& mesh, const FormSet& forms, double kappa,
                            double shift_guess, const CellSolveOptions& opts)
{
    if (mesh.outer_mode != OuterMode::periodic)
        throw PreconditionError("lambda_eps_kappa: requires a periodic cell mesh");
    if (!(kappa > 0.0) || kappa == 1.0)
        throw PreconditionError("lambda_eps_kappa: kappa must be positive and != 1");
    if (kappa > 1.0 && !(kappa * forms.vol_h > 1.0))
        throw PreconditionError("lambda_eps_kappa: kappa |T \\ H| must exceed 1 for kappa > 1");
    if (shift_guess == 0.0)
        throw PreconditionError("lambda_eps_kappa: shift guess must be nonzero");

    const SparseSym G = opts.inject_constraint_sign_fault
                            ? linear_combination(1.0 / forms.s_h, forms.B, kappa, forms.M)
                            : constraint_form(forms, kappa);
    const double want = kappa > 1.0 ? 1.0 : -1.0;
    const EigenOptions eo = eigen_options(opts);

    // Shift sequence: guess, 2x, 0.5x, 4x, 0.25x, ...
    std::string last_failure = "no attempt";
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        const int k = (attempt + 1) / 2;
        const double factor = attempt == 0 ? 1.0 : (attempt % 2 == 1 ? std::ldexp(1.0, k) : std::ldexp(1.0, -k));
        const double shift = shift_guess * factor;
        EigenPair ep;
        try {
            ep = pencil_nearest(forms.A, G, shift, eo);
        } catch (const IndefiniteBreakdown& e) {
            last_failure = e.what();
            continue;
        } catch (const NoConvergence& e) {
            last_failure = e.what();
            continue;
        }
        if (!ep.sign_definite || ep.constraint_value * want <= 0.0) {
            last_failure = "shift " + std::to_string(shift) + " converged to lambda = " +
                           std::to_string(ep.lambda) + (ep.sign_definite ? "" : " (sign-changing)") +
                           " with constraint sign " + std::to_string(ep.constraint_value);
            continue;
        }

        KappaEigen out;
        out.kappa = kappa;
        out.lambda = ep.lambda;
        out.constraint_value = G.quad_form(ep.vector);
        out.residual = ep.residual;
        out.sign_definite = true;
        out.iterations = ep.iterations;
        out.retries = attempt;
        out.shift = shift;
        const double vav = forms.A.quad_form(ep.vector);
        out.rayleigh_residual = std::abs(vav - ep.lambda * out.constraint_value) / std::abs(vav);
        const Vector ones(static_cast<std::size_t>(forms.num_dofs()), 1.0);
        out.integral = forms.M.bilinear(ones, ep.vector);
        out.boundary_average = forms.B.bilinear(ones, ep.vector) / forms.s_h;
        const double l2 = std::sqrt(forms.M.quad_form(ep.vector));
        out.bdav_residual = std::abs(out.boundary_average - kappa * out.integral) / l2;
        out.dofs = ep.vector;
        return out;
    }
    throw WrongBranch("lambda_eps_kappa: no admissible eigenpair for kappa = " + std::to_string(kappa) +
                      " after " + std::to_string(opts.max_retries) + " retries; last: " + last_failure);
}

ExtrapolationResult extrapolate_star(const std::vector<std::pair<double, double>>& samples)
{
    if (samples.size() < 2)
        throw PreconditionError("extrapolate_star: need at least two samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i].first > 0.0))
            throw PreconditionError("extrapolate_star: eps must be positive");
        if (i > 0 && !(samples[i].first < samples[i - 1].first))
            throw PreconditionError("extrapolate_star: eps must decrease");
    }
    ExtrapolationResult r;
    for (const auto& [e, v] : samples) {
        r.eps.push_back(e);
        r.scaled.push_back(v / (e * e));
    }
    const std::size_t n = samples.size();

    // Neville table in eps evaluated at eps = 0; column 1 is first-order Richardson.
    std::vector<std::vector<double>> T(n);
    for (std::size_t i = 0; i < n; ++i) {
        T[i].push_back(r.scaled[i]);
        for (std::size_t j = 1; j <= i; ++j) {
            const double ei = r.eps[i], ej = r.eps[i - j];
            T[i].push_back(T[i][j - 1] + (T[i][j - 1] - T[i - 1][j - 1]) * ei / (ej - ei));
        }
    }
    r.limit = T[n - 1][1];
    r.limit_polynomial = T[n - 1][n - 1];
    r.uncertainty = n >= 3 ? std::abs(T[n - 1][1] - T[n - 2][1]) : std::abs(T[n - 1][1] - T[n - 1][0]);

    for (std::size_t i = 2; i < n; ++i) {
        const double d1 = r.scaled[i - 1] - r.scaled[i - 2];
        const double d2 = r.scaled[i] - r.scaled[i - 1];
        if (d1 * d2 < 0.0)
            r.non_monotone = true;
    }

    r.fitted_order = std::numeric_limits<double>::quiet_NaN();
    if (n >= 3) {
        const double e1 = r.eps[n - 3], e2 = r.eps[n - 2], e3 = r.eps[n - 1];
        const double d1 = r.scaled[n - 3] - r.scaled[n - 2];
        const double d2 = r.scaled[n - 2] - r.scaled[n - 1];
        if (d1 * d2 > 0.0) {
            const double target = d1 / d2;
            auto ratio = [&](double p) {
                return (std::pow(e1, p) - std::pow(e2, p)) / (std::pow(e2, p) - std::pow(e3, p));
            };
            double lo = 1e-3, hi = 20.0;
            if ((ratio(lo) - target) * (ratio(hi) - target) < 0.0) {
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if ((ratio(lo) - target) * (ratio(mid) - target) <= 0.0)
                        hi = mid;
                    else
                        lo = mid;
                }
                r.fitted_order = 0.5 * (lo + hi);
            }
        }
    }
    return r;
}

CellSpectrum compute_cell_spectrum(double eps, double r_cell, int level, std::optional<double> kappa,
                                   const CellSolveOptions& opts)
{
    CellSpectrum cs;
    cs.eps = eps;
    cs.r_cell = r_cell;
    cs.level = level;
    cs.kappa = kappa;

    const CellMesh periodic = build_cell_mesh(r_cell, level, OuterMode::periodic);
    const FormSet fp = assemble_cell_forms(periodic);
    const CellMesh outer = build_cell_mesh(r_cell, level, OuterMode::dirichlet_outer);
    const FormSet fo = assemble_cell_forms(outer);

    cs.vol_h = fp.vol_h;
    cs.s_h = fp.s_h;
    cs.lambda_dir = lambda_dir(periodic, fp, opts).value;
    cs.lambda_st = lambda_st(outer, fo, opts).value;
    cs.cap = capacity(outer, fo, opts).cap;
    if (kappa)
        cs.eig = lambda_eps_kappa(periodic, fp, *kappa, default_shift(r_cell, *kappa), opts);
    return cs;
}

LambdaStarEvaluator cell_extrapolated_evaluator(std::vector<double> eps_list, double a, int level, int n,
                                                const CellSolveOptions& opts)
{
    if (n != 3)
        throw PreconditionError("cell_extrapolated_evaluator: meshed problems are three-dimensional");
    if (eps_list.size() < 2)
        throw PreconditionError("cell_extrapolated_evaluator: need at least two eps values");

    struct Cell {
        double eps;
        double r;
        CellMesh mesh;
        FormSet forms;
    };
    auto cells = std::make_shared<std::vector<Cell>>();
    for (const double e : eps_list) {
        const double r = cell_hole_radius(e, a, n);
        CellMesh m = build_cell_mesh(r, level, OuterMode::periodic);
        FormSet f = assemble_cell_forms(m);
        cells->push_back({e, r, std::move(m), std::move(f)});
    }
    auto eval = [cells, opts](double kappa) {
        if (kappa == 1.0)
            return 0.0;
        std::vector<std::pair<double, double>> samples;
        for (const auto& c : *cells) {
            const KappaEigen ev = lambda_eps_kappa(c.mesh, c.forms, kappa, default_shift(c.r, kappa), opts);
            samples.emplace_back(c.eps, ev.lambda);
        }
        return extrapolate_star(samples).limit;
    };

    LambdaStarEvaluator ev{EvaluatorId::cell_extrapolated, eval, 1e-6};
    // Widen the bracket tolerance to the extrapolation uncertainty in kappa.
    std::vector<std::pair<double, double>> samples;
    for (const auto& c : *cells)
        samples.emplace_back(c.eps, lambda_eps_kappa(c.mesh, c.forms, 0.5, default_shift(c.r, 0.5), opts).lambda);
    const double unc = extrapolate_star(samples).uncertainty;
    const double slope = std::abs(eval(0.55) - eval(0.5)) / 0.05;
    if (slope > 0.0)
        ev.default_tol = std::max(1e-6, unc / slope);
    return ev;
}

} // namespace robinhom
