#include "robinhom/homog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "robinhom/parallel.hpp"
#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"
#include "robinhom/strangeterm.hpp"

namespace robinhom {

namespace {

constexpr double kPi = std::numbers::pi;

double sine_product(const Vec3& x)
{
    return std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * std::sin(kPi * x[2]);
}

Vec3 sine_product_gradient(const Vec3& x)
{
    const double s[3] = {std::sin(kPi * x[0]), std::sin(kPi * x[1]), std::sin(kPi * x[2])};
    const double c[3] = {std::cos(kPi * x[0]), std::cos(kPi * x[1]), std::cos(kPi * x[2])};
    return {kPi * c[0] * s[1] * s[2], kPi * s[0] * c[1] * s[2], kPi * s[0] * s[1] * c[2]};
}

/// Reference solution u0 and its gradient at arbitrary points.
class Reference {
public:
    // closed form
    explicit Reference(double amplitude) : amplitude_(amplitude) {}
    // FEM grid field
    Reference(FieldOnMesh field, int grid_n) : field_(std::move(field)), grid_n_(grid_n) {}

    double value(const Vec3& x, Vec3& grad) const
    {
        if (!field_) {
            const Vec3 g = sine_product_gradient(x);
            for (int i = 0; i < 3; ++i)
                grad[i] = amplitude_ * g[i];
            return amplitude_ * sine_product(x);
        }
        const int n = grid_n_;
        const double h = 1.0 / n;
        int idx[3];
        double t[3];
        for (int d = 0; d < 3; ++d) {
            idx[d] = std::clamp(static_cast<int>(std::floor(x[d] * n)), 0, n - 1);
            t[d] = x[d] * n - idx[d];
        }
        const auto& v = field_->values;
        auto node = [&](int i, int j, int k) {
            return v[static_cast<std::size_t>((k * (n + 1) + j) * (n + 1) + i)];
        };
        double val = 0.0;
        grad = {0.0, 0.0, 0.0};
        for (int c = 0; c < 8; ++c) {
            const int b[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
            double w[3], dw[3];
            for (int d = 0; d < 3; ++d) {
                w[d] = b[d] ? t[d] : 1.0 - t[d];
                dw[d] = (b[d] ? 1.0 : -1.0) / h;
            }
            const double nv = node(idx[0] + b[0], idx[1] + b[1], idx[2] + b[2]);
            val += nv * w[0] * w[1] * w[2];
            grad[0] += nv * dw[0] * w[1] * w[2];
            grad[1] += nv * w[0] * dw[1] * w[2];
            grad[2] += nv * w[0] * w[1] * dw[2];
        }
        return val;
    }

private:
    double amplitude_ = 0.0;
    std::optional<FieldOnMesh> field_;
    int grid_n_ = 0;
};

FormSet volume_forms(const HexMesh& mesh)
{
    std::vector<Index> ident(mesh.nodes.size());
    for (std::size_t i = 0; i < ident.size(); ++i)
        ident[i] = static_cast<Index>(i);
    return assemble_forms(mesh.nodes, mesh.hexes, {}, std::move(ident));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2)
        return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

} // namespace

std::shared_ptr<const HexMesh> as_hex_mesh(const PerforatedMesh& pmesh)
{
    auto m = std::make_shared<HexMesh>();
    m->nodes = pmesh.nodes;
    m->hexes = pmesh.hexes;
    m->is_dirichlet = pmesh.is_dirichlet;
    return m;
}

std::shared_ptr<const HexMesh> unit_cube_grid(int grid_n)
{
    if (grid_n < 1)
        throw PreconditionError("unit_cube_grid: need at least one interval per side");
    auto m = std::make_shared<HexMesh>();
    const int p = grid_n + 1;
    const double h = 1.0 / grid_n;
    for (int k = 0; k < p; ++k)
        for (int j = 0; j < p; ++j)
            for (int i = 0; i < p; ++i) {
                m->nodes.push_back({i * h, j * h, k * h});
                const bool bd = i == 0 || j == 0 || k == 0 || i == grid_n || j == grid_n || k == grid_n;
                m->is_dirichlet.push_back(bd ? 1 : 0);
            }
    auto id = [p](int i, int j, int k) { return static_cast<NodeId>((k * p + j) * p + i); };
    for (int k = 0; k < grid_n; ++k)
        for (int j = 0; j < grid_n; ++j)
            for (int i = 0; i < grid_n; ++i)
                m->hexes.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k),
                                    id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1),
                                    id(i, j + 1, k + 1)});
    return m;
}

std::string to_string(FieldKind k)
{
    switch (k) {
    case FieldKind::u_eps: return "u_eps";
    case FieldKind::u_0: return "u_0";
    case FieldKind::corrector: return "corrector";
    }
    return "unknown";
}

Load sine_load(double amplitude)
{
    return {[amplitude](const Vec3& x) { return amplitude * sine_product(x); }, amplitude};
}

Load zero_load()
{
    return {[](const Vec3&) { return 0.0; }, 0.0};
}

Load custom_load(ScalarField f)
{
    return {std::move(f), std::nullopt};
}

double homogenized_amplitude(double sine_amplitude, double alpha, double c)
{
    return sine_amplitude / (3.0 * kPi * kPi + alpha + c);
}

FieldOnMesh solve_homogenized(int grid_n, double alpha, double c, const Load& load, HomogPath path,
                              double tol)
{
    if (!(c >= 0.0) || !(alpha >= 0.0))
        throw PreconditionError("solve_homogenized: need alpha >= 0 and c >= 0");
    if (!load.f)
        throw PreconditionError("solve_homogenized: missing source term");
    FieldOnMesh out;
    out.kind = FieldKind::u_0;
    out.mesh = unit_cube_grid(grid_n);
    const HexMesh& mesh = *out.mesh;

    if (path == HomogPath::closed_form) {
        if (!load.sine_amplitude)
            throw PreconditionError("solve_homogenized: closed form needs a sine-product source");
        const double amp = homogenized_amplitude(*load.sine_amplitude, alpha, c);
        out.values.resize(mesh.nodes.size());
        for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
            out.values[i] = mesh.is_dirichlet[i] ? 0.0 : amp * sine_product(mesh.nodes[i]);
        // continuum energy -1/2 int f u0
        out.load_work = *load.sine_amplitude * amp / 8.0;
        out.energy = -0.5 * out.load_work;
        return out;
    }

    const FormSet fs = volume_forms(mesh);
    const Vector load_vec = assemble_load(mesh.nodes, mesh.hexes, load.f);
    std::vector<Index> free;
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
        if (!mesh.is_dirichlet[i])
            free.push_back(static_cast<Index>(i));
    const SparseSym K = linear_combination(1.0, fs.A, alpha + c, fs.M).restrict_to(free);
    Vector rhs(free.size());
    for (std::size_t k = 0; k < free.size(); ++k)
        rhs[k] = load_vec[free[k]];
    const Vector u = cg_solve(K, rhs, tol, &out.solve);
    out.values.assign(mesh.nodes.size(), 0.0);
    for (std::size_t k = 0; k < free.size(); ++k)
        out.values[free[k]] = u[k];
    out.load_work = dot(rhs, u);
    out.energy = 0.5 * K.quad_form(u) - out.load_work;
    return out;
}

FieldOnMesh solve_perforated(const PerforatedMesh& pmesh, const DomainForms& forms, double alpha,
                             double beta, double mu, const Load& load, double tol)
{
    if (!load.f)
        throw PreconditionError("solve_perforated: missing source term");
    const LinearSystem sys = assemble_domain_system(pmesh, forms, alpha, beta, mu, load.f);
    FieldOnMesh out;
    out.kind = FieldKind::u_eps;
    out.mesh = as_hex_mesh(pmesh);
    const Vector u = cg_solve(sys.K, sys.rhs, tol, &out.solve);
    out.values = sys.expand(u);
    out.load_work = dot(sys.rhs, u);
    out.energy = 0.5 * sys.K.quad_form(u) - out.load_work;
    return out;
}

FieldOnMesh solve_perforated(const PerforatedMesh& pmesh, double alpha, double beta, double mu,
                             const Load& load, double tol)
{
    return solve_perforated(pmesh, assemble_domain_forms(pmesh), alpha, beta, mu, load, tol);
}

double corrector_mass(const FormSet& cell_forms, const Vector& v)
{
    const Vector ones(v.size(), 1.0);
    return cell_forms.M.bilinear(ones, v);
}

FieldOnMesh build_corrector(const CellMesh& cell, const FormSet& cell_forms, const Vector& v,
                            const PerforatedMesh& pmesh)
{
    if (!pmesh.cell)
        throw MeshMismatch("build_corrector: perforated mesh has no cell template");
    const CellMesh& tpl = *pmesh.cell;
    if (static_cast<Index>(v.size()) != cell_forms.num_dofs())
        throw MeshMismatch("build_corrector: eigenvector size does not match the cell forms");
    if (cell_forms.dof_of_node.size() != cell.nodes.size())
        throw MeshMismatch("build_corrector: cell forms do not belong to the cell mesh");
    if (tpl.nodes.size() != cell.nodes.size() || tpl.level != cell.level ||
        tpl.hole_radius != cell.hole_radius)
        throw MeshMismatch("build_corrector: perforated mesh uses a different cell template");
    for (std::size_t i = 0; i < cell.nodes.size(); ++i)
        for (int d = 0; d < 3; ++d)
            if (tpl.nodes[i][d] != cell.nodes[i][d])
                throw MeshMismatch("build_corrector: cell template node coordinates differ");

    const double mass = corrector_mass(cell_forms, v);
    if (!(std::abs(mass) > 0.0))
        throw PreconditionError("build_corrector: eigenvector has zero integral");
    const Vector nodal = cell_forms.to_nodes(v);
    FieldOnMesh w;
    w.kind = FieldKind::corrector;
    w.mesh = as_hex_mesh(pmesh);
    w.values.resize(pmesh.nodes.size());
    for (std::size_t i = 0; i < pmesh.nodes.size(); ++i)
        w.values[i] = nodal[pmesh.node_origin[i]] / mass;
    return w;
}

double corrector_residual(const FieldOnMesh& w, const PerforatedMesh& pmesh, const DomainForms& forms,
                          double kappa, double lambda, double mu)
{
    const double e2 = pmesh.eps * pmesh.eps;
    const Vector aw = forms.A * w.values;
    const Vector mw = forms.M * w.values;
    const Vector bw = forms.B_gamma * w.values;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < aw.size(); ++i) {
        if (pmesh.is_dirichlet[i])
            continue;
        const double r = aw[i] + kappa * lambda / e2 * mw[i] - lambda / (e2 * mu) * bw[i];
        num += r * r;
        den += aw[i] * aw[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

double trace_ratio(const FieldOnMesh& u, const DomainForms& forms, double mu)
{
    const double boundary = forms.B_gamma.quad_form(u.values) / mu;
    return boundary / (forms.A.quad_form(u.values) + forms.M.quad_form(u.values));
}

double gamma_mean_square(const FieldOnMesh& u, const DomainForms& forms)
{
    const Vector ones(u.values.size(), 1.0);
    return forms.B_gamma.quad_form(u.values) / forms.B_gamma.quad_form(ones);
}

double l2_norm(const FieldOnMesh& u)
{
    double acc = 0.0;
    for (const auto& h : u.mesh->hexes) {
        for (const auto& qp : hex_quadrature(hex_coordinates(u.mesh->nodes, h))) {
            double v = 0.0;
            for (int a = 0; a < 8; ++a)
                v += qp.N[a] * u.values[h[a]];
            acc += qp.weight * v * v;
        }
    }
    return std::sqrt(acc);
}

ConvergenceReport convergence_study(const std::vector<int>& cells_per_side, double alpha, double beta,
                                    const Load& load, const ConvergenceOptions& opts, int threads)
{
    if (cells_per_side.empty())
        throw PreconditionError("convergence_study: empty eps list");
    for (std::size_t i = 0; i < cells_per_side.size(); ++i) {
        if (cells_per_side[i] < 1)
            throw PreconditionError("convergence_study: cells per side must be positive");
        if (i > 0 && cells_per_side[i] <= cells_per_side[i - 1])
            throw PreconditionError("convergence_study: eps must be strictly decreasing");
    }
    if (!(beta > 0.0))
        throw PreconditionError("convergence_study: beta must be positive");
    if (!load.f)
        throw PreconditionError("convergence_study: missing source term");

    ConvergenceReport rep;
    rep.alpha = alpha;
    rep.beta = beta;
    const StrangeTermResult st = kappa_star(beta, closed_form_evaluator(3));
    rep.kappa_star = st.kappa_star;
    rep.strange_term = st.strange_term;

    const bool closed = load.sine_amplitude.has_value() && opts.homog_grid <= 0;
    std::shared_ptr<const Reference> ref;
    if (closed) {
        ref = std::make_shared<Reference>(homogenized_amplitude(*load.sine_amplitude, alpha, rep.strange_term));
    } else {
        const int g = opts.homog_grid > 0 ? opts.homog_grid : 32;
        ref = std::make_shared<Reference>(solve_homogenized(g, alpha, rep.strange_term, load), g);
    }

    auto run_row = [&](std::size_t idx) {
        ConvergenceRow row;
        const int N = cells_per_side[idx];
        row.eps = 1.0 / N;
        try {
            const double eps = row.eps;
            const double r = cell_hole_radius(eps, opts.a, 3);
            auto cell = std::make_shared<const CellMesh>(build_cell_mesh(r, opts.level, OuterMode::periodic));
            const FormSet cf = assemble_cell_forms(*cell);
            const KappaEigen eig = lambda_eps_kappa(*cell, cf, rep.kappa_star,
                                                    default_shift(r, rep.kappa_star), opts.cell);
            row.lambda = eig.lambda;
            row.eta = std::abs(beta + eig.lambda / (eps * eps));
            row.mu = mu_coeff(eps, 3, r);
            row.mu_h = cf.s_h / eps;

            const PerforatedMesh pm = build_perforated_mesh(N, cell);
            const DomainForms df = assemble_domain_forms(pm);
            const FieldOnMesh u = solve_perforated(pm, df, alpha, beta, row.mu, load, opts.linear_tol);
            const FieldOnMesh w = build_corrector(*cell, cf, eig.dofs, pm);
            row.dofs = static_cast<Index>(u.values.size() - pm.outer_dirichlet_nodes.size());
            row.energy = u.energy;
            row.corrector_residual = corrector_residual(w, pm, df, rep.kappa_star, eig.lambda, row.mu_h);

            double l2 = 0.0, h1 = 0.0, gap = 0.0;
            for (const auto& h : pm.hexes) {
                for (const auto& qp : hex_quadrature(hex_coordinates(pm.nodes, h))) {
                    double uv = 0.0, wv = 0.0;
                    Vec3 gu{}, gw{};
                    for (int a = 0; a < 8; ++a) {
                        const double ua = u.values[h[a]], wa = w.values[h[a]];
                        uv += qp.N[a] * ua;
                        wv += qp.N[a] * wa;
                        for (int d = 0; d < 3; ++d) {
                            gu[d] += qp.grad[a][d] * ua;
                            gw[d] += qp.grad[a][d] * wa;
                        }
                    }
                    Vec3 g0;
                    const double u0 = ref->value(qp.x, g0);
                    l2 += qp.weight * (uv - u0) * (uv - u0);
                    double e1 = (uv - wv * u0) * (uv - wv * u0);
                    for (int d = 0; d < 3; ++d) {
                        const double ed = gu[d] - (u0 * gw[d] + wv * g0[d]);
                        e1 += ed * ed;
                    }
                    h1 += qp.weight * e1;
                    gap += qp.weight * (wv - 1.0) * (wv - 1.0);
                }
            }
            row.l2_error = std::sqrt(l2);
            row.h1_corrector_error = std::sqrt(h1);
            row.corrector_l2_gap = std::sqrt(gap);
            row.rate_quotient = row.h1_corrector_error / (eps + row.eta + row.mu);
        } catch (const Error& e) {
            row.failed = true;
            row.message = e.what();
        }
        return row;
    };
    rep.rows = parallel_map(cells_per_side.size(), threads, run_row);
    return rep;
}

std::string to_string(Trend t)
{
    switch (t) {
    case Trend::decreasing: return "decreasing";
    case Trend::increasing: return "increasing";
    case Trend::settling: return "settling";
    case Trend::undetermined: return "undetermined";
    }
    return "unknown";
}

RegimeReport regime_sweep(double a, const std::vector<double>& eps_list, double kappa, int level,
                          const CellSolveOptions& opts, int threads)
{
    if (!(a > 1.0))
        throw PreconditionError("regime_sweep: scaling exponent must exceed 1");
    if (eps_list.empty())
        throw PreconditionError("regime_sweep: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0 && eps_list[i] < 1.0))
            throw PreconditionError("regime_sweep: eps must lie in (0,1)");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
            throw PreconditionError("regime_sweep: eps must be strictly decreasing");
    }
    if (!(kappa > 0.0) || kappa == 1.0)
        throw PreconditionError("regime_sweep: kappa must be positive and != 1");

    RegimeReport rep;
    rep.a = a;
    rep.kappa = kappa;
    rep.level = level;
    auto run_row = [&](std::size_t idx) {
        RegimeRow row;
        row.eps = eps_list[idx];
        try {
            row.r_cell = std::pow(row.eps, a - 1.0);
            const double r = cell_hole_radius(row.eps, a, 3);
            const CellMesh mesh = build_cell_mesh(r, level, OuterMode::periodic);
            const FormSet forms = assemble_cell_forms(mesh);
            const KappaEigen eig = lambda_eps_kappa(mesh, forms, kappa, default_shift(r, kappa), opts);
            row.lambda = eig.lambda;
            row.scaled = eig.lambda / (row.eps * row.eps);
        } catch (const Error& e) {
            row.failed = true;
            row.message = e.what();
        }
        return row;
    };
    rep.rows = parallel_map(eps_list.size(), threads, run_row);

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        auto& row = rep.rows[i];
        if (row.failed)
            continue;
        if (i > 0 && !rep.rows[i - 1].failed)
            row.ratio = row.scaled / rep.rows[i - 1].scaled;
        xs.push_back(row.eps);
        ys.push_back(std::abs(row.scaled));
    }
    rep.loglog_slope = loglog_slope(xs, ys);
    rep.local_slope = xs.size() >= 2
                          ? loglog_slope({xs.end() - 2, xs.end()}, {ys.end() - 2, ys.end()})
                          : std::numeric_limits<double>::quiet_NaN();
    if (std::isnan(rep.local_slope))
        rep.trend = Trend::undetermined;
    else if (rep.local_slope > 0.5)
        rep.trend = Trend::decreasing;
    else if (rep.local_slope < -0.5)
        rep.trend = Trend::increasing;
    else
        rep.trend = Trend::settling;
    return rep;
}

} // namespace robinhom
