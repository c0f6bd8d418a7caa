#include "acceptance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "robinhom/cellspec.hpp"
#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"
#include "robinhom/homog.hpp"
#include "robinhom/strangeterm.hpp"

namespace robinhom::acceptance {

namespace {

constexpr double kPi = std::numbers::pi;

struct Spec {
    int id;
    const char* title;
    double budget;  // seconds
};

const Spec kSpecs[] = {
    {1, "ball closed-form chain", 1.0},
    {2, "exterior numeric oracle", 1.0},
    {3, "strange-term limits", 1.0},
    {4, "cell identities at eps=1/2, level 3", 120.0},
    {5, "monotonicity in kappa", 180.0},
    {6, "Dirichlet bound -kappa lambda <= Lambda^Dir", 120.0},
    {7, "capacity versus Dirichlet eigenvalue", 180.0},
    {8, "critical-scaling limits", 600.0},
    {9, "homogenization convergence", 1200.0},
    {10, "regime classification", 600.0},
    {11, "kernel oracles", 5.0},
};

/// Collects named checks of one criterion.
class Checks {
public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok)
            ok_ = false;
        if (!msg_.empty())
            msg_ += "; ";
        msg_ += (ok ? "" : "FAILED ") + what;
    }
    bool ok() const { return ok_; }
    const std::string& message() const { return msg_; }

private:
    bool ok_ = true;
    std::string msg_;
};

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string num(double v)
{
    return fmt("%.6g", v);
}

double rel(double a, double b)
{
    return std::abs(a - b) / std::abs(b);
}

Eigen::MatrixXd to_dense(const SparseSym& m)
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.dim(), m.dim());
    const auto rp = m.row_ptr();
    const auto cols = m.cols();
    const auto vals = m.values();
    for (Index i = 0; i < m.dim(); ++i)
        for (Index k = rp[i]; k < rp[i + 1]; ++k)
            d(i, cols[k]) = vals[k];
    return d;
}

CellSolveOptions solve_options(const Options& o)
{
    CellSolveOptions c;
    c.inject_constraint_sign_fault = o.inject_constraint_sign_fault;
    return c;
}

struct Cell {
    CellMesh mesh;
    FormSet forms;
};

Cell periodic_cell(double eps, int level)
{
    CellMesh m = build_cell_mesh(cell_hole_radius(eps, 3.0, 3), level, OuterMode::periodic);
    FormSet f = assemble_cell_forms(m);
    return {std::move(m), std::move(f)};
}

void criterion1(Checks& c)
{
    const double l2 = lambda_star_ball(2.0, 3);
    const double lh = lambda_star_ball(0.5, 3);
    c.expect(std::abs(l2 - 2 * kPi) <= 1e-12, "lambda_*(2) = " + fmt("%.15g", l2));
    c.expect(std::abs(lh + 4 * kPi) <= 1e-12, "lambda_*(1/2) = " + fmt("%.15g", lh));
    const StrangeTermResult st = kappa_star(4 * kPi, closed_form_evaluator(3));
    c.expect(std::abs(st.kappa_star - 0.5) <= 1e-10, "kappa_*(4pi) = " + fmt("%.15g", st.kappa_star));
    c.expect(std::abs(st.strange_term - 2 * kPi) <= 1e-10,
             "strange term = " + fmt("%.15g", st.strange_term));
}

void criterion2(Checks& c)
{
    for (const double k : {0.5, 2.0}) {
        const double num_v = exterior_numeric(k, 3, 1000.0, 512);
        const double e = rel(num_v, lambda_star_ball(k, 3));
        c.expect(e <= 2e-3, "kappa=" + num(k) + " rel.err " + fmt("%.3e", e));
    }
}

void criterion3(Checks& c)
{
    const auto ev = closed_form_evaluator(3);
    const double small = kappa_star(1e-6, ev).strange_term;
    c.expect(small <= 1e-6, "strange_term(1e-6) = " + fmt("%.3e", small));
    const double big = kappa_star(1e6, ev).strange_term;
    const double e = rel(big, 4 * kPi);
    c.expect(e <= 2e-5, "strange_term(1e6) rel. gap to 4pi " + fmt("%.3e", e));
    const auto curve = strange_term_curve({0.1, 1.0, 10.0, 100.0}, ev);
    bool inc = true;
    for (std::size_t i = 1; i < curve.size(); ++i)
        inc = inc && curve[i].strange_term > curve[i - 1].strange_term;
    c.expect(inc, "curve strictly increasing over beta in {0.1,1,10,100}");
}

void criterion4(Checks& c, const Options& o)
{
    const double eps = 0.5;
    const Cell cell = periodic_cell(eps, 3);
    for (const double k : {0.5, 2.0}) {
        const KappaEigen e = lambda_eps_kappa(cell.mesh, cell.forms, k,
                                              default_shift(cell.mesh.hole_radius, k), solve_options(o));
        const bool sign_ok = (k > 1.0) == (e.constraint_value > 0.0) && (k > 1.0) == (e.lambda > 0.0);
        c.expect(e.sign_definite && sign_ok, "kappa=" + num(k) + " sign-definite, constraint sign ok");
        c.expect(e.rayleigh_residual <= 1e-7, "kappa=" + num(k) + " Rayleigh " + fmt("%.2e", e.rayleigh_residual));
        c.expect(e.bdav_residual <= 1e-6, "kappa=" + num(k) + " bdav " + fmt("%.2e", e.bdav_residual));
    }
}

void criterion5(Checks& c, const Options& o)
{
    const double eps = 0.5;
    const Cell cell = periodic_cell(eps, 2);
    double prev = -std::numeric_limits<double>::infinity();
    std::string values;
    bool mono = true;
    for (const double k : {0.3, 0.6, 0.9, 1.5, 2.0, 3.0}) {
        const KappaEigen e = lambda_eps_kappa(cell.mesh, cell.forms, k,
                                              default_shift(cell.mesh.hole_radius, k), solve_options(o));
        mono = mono && e.lambda >= prev - 1e-8;
        prev = e.lambda;
        values += (values.empty() ? "" : ",") + num(e.lambda);
    }
    c.expect(mono, "lambda(1/2, kappa) nondecreasing: " + values);
}

void criterion6(Checks& c, const Options& o)
{
    const Cell cell = periodic_cell(0.5, 2);
    const double dir = lambda_dir(cell.mesh, cell.forms).value;
    for (const double k : {0.3, 0.6, 0.9}) {
        const KappaEigen e = lambda_eps_kappa(cell.mesh, cell.forms, k,
                                              default_shift(cell.mesh.hole_radius, k), solve_options(o));
        const double lhs = -k * e.lambda;
        c.expect(lhs <= dir + 1e-10, "kappa=" + num(k) + ": " + num(lhs) + " <= " + num(dir));
    }
}

void criterion7(Checks& c)
{
    auto ratio_at = [](double eps, double* cap_out) {
        const double r = cell_hole_radius(eps, 3.0, 3);
        const CellMesh pm = build_cell_mesh(r, 2, OuterMode::periodic);
        const CellMesh om = build_cell_mesh(r, 2, OuterMode::dirichlet_outer);
        const double dir = lambda_dir(pm, assemble_cell_forms(pm)).value;
        const double cap = capacity(om, assemble_cell_forms(om)).cap;
        if (cap_out)
            *cap_out = cap;
        return cap / dir;
    };
    double cap_half = 0.0;
    const double r_half = ratio_at(0.5, &cap_half);
    const double r_quarter = ratio_at(0.25, nullptr);
    c.expect(r_quarter >= 0.9 && r_quarter <= 1.1, "Cap/Dir at eps=1/4: " + num(r_quarter));
    c.expect(std::abs(r_quarter - 1.0) < std::abs(r_half - 1.0), "closer to 1 than at eps=1/2 (" + num(r_half) + ")");
    const double r = 0.25;
    const double lo = 4 * kPi / (1 / r - 2 / std::sqrt(3.0));
    const double hi = 4 * kPi / (1 / r - 2);
    c.expect(cap_half >= lo && cap_half <= hi,
             "Cap(r=0.25) = " + num(cap_half) + " in [" + num(lo) + ", " + num(hi) + "]");
}

void criterion8(Checks& c, const Options& o)
{
    std::vector<std::pair<double, double>> lam, dir, st;
    for (const double eps : {0.5, 1.0 / 3.0, 0.25}) {
        const CellSpectrum cs = compute_cell_spectrum(eps, cell_hole_radius(eps, 3.0, 3), 2, 2.0, solve_options(o));
        lam.emplace_back(eps, cs.eig->lambda);
        dir.emplace_back(eps, cs.lambda_dir);
        st.emplace_back(eps, cs.lambda_st);
    }
    const double l = extrapolate_star(lam).limit;
    const double d = extrapolate_star(dir).limit;
    const double s = extrapolate_star(st).limit;
    c.expect(rel(l, 2 * kPi) <= 0.15, "lambda(eps,2)/eps^2 -> " + num(l) + " (" + fmt("%+.1f%%", 100 * (l / (2 * kPi) - 1)) + ")");
    c.expect(rel(d, 4 * kPi) <= 0.15, "Lambda^Dir/eps^2 -> " + num(d) + " (" + fmt("%+.1f%%", 100 * (d / (4 * kPi) - 1)) + ")");
    c.expect(rel(s, 4 * kPi) <= 0.15, "Lambda^St/eps^2 -> " + num(s) + " (" + fmt("%+.1f%%", 100 * (s / (4 * kPi) - 1)) + ")");
}

void criterion9(Checks& c, const Options& o)
{
    ConvergenceOptions co;
    co.level = 2;
    co.cell = solve_options(o);
    const ConvergenceReport rep =
        convergence_study({2, 3, 4}, 0.0, 4 * kPi, sine_load(3 * kPi * kPi + 2 * kPi), co, o.threads);
    bool ok_rows = true;
    std::string l2s;
    double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
    for (const auto& r : rep.rows) {
        if (r.failed) {
            ok_rows = false;
            c.expect(false, "eps=" + num(r.eps) + ": " + r.message);
            continue;
        }
        l2s += (l2s.empty() ? "" : ",") + num(r.l2_error);
        qmin = std::min(qmin, r.rate_quotient);
        qmax = std::max(qmax, r.rate_quotient);
    }
    if (!ok_rows)
        return;
    bool dec = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        dec = dec && rep.rows[i].l2_error < rep.rows[i - 1].l2_error;
    c.expect(dec, "L2 errors strictly decreasing: " + l2s);
    c.expect(qmax / qmin <= 10.0, "rate quotient spread " + num(qmax / qmin));
}

void criterion10(Checks& c, const Options& o)
{
    const std::vector<double> chain{0.5, 1.0 / 3.0, 0.25};
    auto describe = [](const RegimeReport& r) {
        std::string s;
        for (const auto& row : r.rows) {
            if (!s.empty())
                s += ",";
            s += row.failed ? std::string("fail") : num(row.scaled);
        }
        return s;
    };
    for (const double a : {4.0, 2.0, 3.0}) {
        const RegimeReport rep = regime_sweep(a, chain, 2.0, 2, solve_options(o), o.threads);
        bool ok = true;
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const auto& row = rep.rows[i];
            if (row.failed) {
                ok = false;
                continue;
            }
            if (i == 0)
                continue;
            if (!row.ratio) {
                ok = false;
                continue;
            }
            const double q = *row.ratio;
            if (a > 3.0)
                ok = ok && q <= 0.5;
            else if (a < 3.0)
                ok = ok && q >= 2.0;
            else
                ok = ok && q >= 0.5 && q <= 2.0;
        }
        const char* want = a > 3.0 ? "decreasing >=2x per step" : a < 3.0 ? "increasing >=2x per step"
                                                                           : "ratios in [0.5,2]";
        c.expect(ok, "a=" + num(a) + " " + want + ": lambda/eps^2 = " + describe(rep) +
                         " (trend " + to_string(rep.trend) + ")");
    }
}

void criterion11(Checks& c)
{
    // Diagonal pencil.
    {
        const SparseSym A = SparseSym::diagonal(std::vector<double>{1.0, 2.0});
        const SparseSym G = SparseSym::diagonal(std::vector<double>{1.0, -1.0});
        const EigenPair p1 = pencil_nearest(A, G, 0.5);
        const EigenPair p2 = pencil_nearest(A, G, -1.5);
        c.expect(std::abs(p1.lambda - 1.0) <= 1e-8 && p1.constraint_value > 0, "diag pencil lambda=1");
        c.expect(std::abs(p2.lambda + 2.0) <= 1e-8 && p2.constraint_value < 0, "diag pencil lambda=-2");
    }

    const FormSet fs = block_subproblem(0.25, 1);
    c.expect(fs.num_dofs() <= 50, "block problem with " + std::to_string(fs.num_dofs()) + " dofs");

    // Indefinite pencil on all dofs.
    EigenOptions eo;
    eo.tol = 1e-11;
    eo.linear_tol = 1e-13;
    eo.max_iter = 5000;
    for (const double k : {0.5, 2.0}) {
        const SparseSym G = constraint_form(fs, k);
        const double shift = default_shift(0.25, k);
        const EigenPair p = pencil_nearest(fs.A, G, shift, eo);
        Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(to_dense(fs.A), to_dense(G));
        double best = std::numeric_limits<double>::quiet_NaN();
        for (Eigen::Index i = 0; i < ges.betas().size(); ++i) {
            if (std::abs(ges.betas()(i)) < 1e-14)
                continue;
            const std::complex<double> l = ges.alphas()(i) / ges.betas()(i);
            if (std::abs(l.imag()) > 1e-9 * (1.0 + std::abs(l.real())))
                continue;
            if (std::isnan(best) || std::abs(l.real() - shift) < std::abs(best - shift))
                best = l.real();
        }
        const double e = std::abs(p.lambda - best) / std::max(1.0, std::abs(best));
        c.expect(e <= 1e-8, "pencil kappa=" + num(k) + " vs QZ " + fmt("%.1e", e));
    }

    // Definite pencil with the outer face fixed.
    const auto free = fs.dofs_without(fs.outer_dof);
    const SparseSym Af = fs.A.restrict_to(free);
    const SparseSym Mf = fs.M.restrict_to(free);
    {
        EigenOptions io = eo;
        const EigenPair p = inverse_power(Af, Mf, io);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(Af), to_dense(Mf));
        const double ref = es.eigenvalues()(0);
        const double e = rel(p.lambda, ref);
        c.expect(e <= 1e-8, "inverse_power vs dense " + fmt("%.1e", e));
        const EigenPair q = pencil_nearest(Af, Mf, 0.5 * ref, io);
        const double e2 = rel(q.lambda, ref);
        c.expect(e2 <= 1e-8, "pencil_nearest on definite pencil " + fmt("%.1e", e2));
    }

    // CG against a dense Cholesky solve.
    {
        std::mt19937_64 rng(20240611);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vector rhs(free.size());
        for (auto& v : rhs)
            v = u(rng);
        const Vector x = cg_solve(Af, rhs, 1e-14);
        const Eigen::VectorXd ref =
            to_dense(Af).llt().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size())));
        double diff = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            diff = std::max(diff, std::abs(x[i] - ref(static_cast<Eigen::Index>(i))));
        const double e = diff / ref.cwiseAbs().maxCoeff();
        c.expect(e <= 1e-8, "CG vs Cholesky " + fmt("%.1e", e));
    }
}

} // namespace

const std::set<int>& quick_subset()
{
    static const std::set<int> s{1, 2, 3, 5, 6, 11};
    return s;
}

int criterion_count()
{
    return static_cast<int>(std::size(kSpecs));
}

std::string criterion_title(int id)
{
    for (const auto& s : kSpecs)
        if (s.id == id)
            return s.title;
    return "unknown";
}

FormSet block_subproblem(double r_cell, int level, OuterMode mode)
{
    const CellMesh mesh = build_cell_mesh(r_cell, level, mode);
    const int m = mesh.face_divisions();
    const std::size_t nhex = static_cast<std::size_t>(m) * m * mesh.radial_layers();
    std::vector<HexCell> hexes(mesh.hexes.begin(), mesh.hexes.begin() + static_cast<std::ptrdiff_t>(nhex));

    std::map<NodeId, NodeId> renumber;
    for (const auto& h : hexes)
        for (const NodeId n : h)
            renumber.emplace(n, 0);
    std::vector<Vec3> nodes;
    for (auto& [old_id, new_id] : renumber) {
        new_id = static_cast<NodeId>(nodes.size());
        nodes.push_back(mesh.nodes[old_id]);
    }
    for (auto& h : hexes)
        for (auto& n : h)
            n = renumber.at(n);
    std::vector<QuadFace> faces;
    for (const auto& f : mesh.hole_faces) {
        if (std::all_of(f.begin(), f.end(), [&](NodeId n) { return renumber.count(n) > 0; })) {
            QuadFace g;
            for (int a = 0; a < 4; ++a)
                g[a] = renumber.at(f[a]);
            faces.push_back(g);
        }
    }
    std::vector<Index> ident(nodes.size());
    for (std::size_t i = 0; i < ident.size(); ++i)
        ident[i] = static_cast<Index>(i);
    FormSet fs = assemble_forms(nodes, hexes, faces, std::move(ident));
    fs.outer_dof.assign(nodes.size(), 0);
    for (const auto& [old_id, new_id] : renumber)
        if (mesh.on_outer[old_id])
            fs.outer_dof[new_id] = 1;
    return fs;
}

std::vector<CriterionResult> run(const Options& opts, const std::function<void(const CriterionResult&)>& report)
{
    std::vector<CriterionResult> out;
    for (const auto& spec : kSpecs) {
        CriterionResult r;
        r.id = spec.id;
        r.title = spec.title;
        r.budget_seconds = spec.budget;
        const bool selected = opts.only.empty() ? (!opts.quick || quick_subset().count(spec.id) > 0)
                                                : opts.only.count(spec.id) > 0;
        if (!selected) {
            r.skipped = true;
            r.passed = true;
            r.detail = "not selected";
            out.push_back(r);
            if (report)
                report(r);
            continue;
        }
        Checks c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            switch (spec.id) {
            case 1: criterion1(c); break;
            case 2: criterion2(c); break;
            case 3: criterion3(c); break;
            case 4: criterion4(c, opts); break;
            case 5: criterion5(c, opts); break;
            case 6: criterion6(c, opts); break;
            case 7: criterion7(c); break;
            case 8: criterion8(c, opts); break;
            case 9: criterion9(c, opts); break;
            case 10: criterion10(c, opts); break;
            case 11: criterion11(c); break;
            default: break;
            }
        } catch (const std::exception& e) {
            c.expect(false, std::string("error: ") + e.what());
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        c.expect(r.seconds <= spec.budget, "runtime " + fmt("%.2fs", r.seconds) + " <= " + fmt("%.0fs", spec.budget));
        r.passed = c.ok();
        r.detail = c.message();
        out.push_back(r);
        if (report)
            report(r);
    }
    return out;
}

std::string format_line(const CriterionResult& r)
{
    std::ostringstream os;
    char head[96];
    std::snprintf(head, sizeof head, "criterion %2d  %-4s  %-44s", r.id,
                  r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL"), r.title.c_str());
    os << head;
    if (!r.skipped)
        os << "  " << r.detail;
    return os.str();
}

} // namespace robinhom::acceptance
