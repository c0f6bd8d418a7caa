#include <doctest.h>

#include <cmath>
#include <numbers>

#include "robinhom/cellspec.hpp"
#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"
#include "test_support.hpp"

using namespace robinhom;

namespace {

constexpr double kPi = std::numbers::pi;

struct Cell {
    CellMesh periodic, outer;
    FormSet pf, of;
};

Cell make_cell(double r, int level)
{
    Cell c{build_cell_mesh(r, level, OuterMode::periodic), build_cell_mesh(r, level, OuterMode::dirichlet_outer),
           {}, {}};
    c.pf = assemble_cell_forms(c.periodic);
    c.of = assemble_cell_forms(c.outer);
    return c;
}

const Cell& half_cell()
{
    static const Cell c = make_cell(0.25, 2);
    return c;
}

} // namespace

TEST_CASE("Dirichlet eigenvalue: positivity, sign and mesh convergence")
{
    const Cell& c = half_cell();
    const CellField d2 = lambda_dir(c.periodic, c.pf);
    CHECK(d2.value > 0.0);
    CHECK(d2.sign_definite);
    CHECK(c.pf.M.quad_form(d2.dofs) == doctest::Approx(1.0).epsilon(1e-10));
    for (Index i = 0; i < c.pf.num_dofs(); ++i) {
        if (c.pf.hole_dof[i])
            CHECK(d2.dofs[i] == 0.0);
        else
            CHECK(d2.dofs[i] >= -1e-10);
    }
    const CellMesh m3 = build_cell_mesh(0.25, 3, OuterMode::periodic);
    const CellField d3 = lambda_dir(m3, assemble_cell_forms(m3));
    CHECK(std::abs(d2.value - d3.value) / d3.value <= 0.05);
    CHECK_THROWS_AS(lambda_dir(c.outer, c.of), PreconditionError);
}

TEST_CASE("Steklov eigenvalue and capacity")
{
    const Cell& c = half_cell();
    const CellField st = lambda_st(c.outer, c.of);
    CHECK(st.value > 0.0);
    CHECK(st.sign_definite);
    const SparseSym bs = linear_combination(1.0 / c.of.s_h, c.of.B, 0.0, c.of.M);
    CHECK(bs.quad_form(st.dofs) == doctest::Approx(1.0).epsilon(1e-10));
    double outer_max = 0.0;
    for (Index i = 0; i < c.of.num_dofs(); ++i)
        if (c.of.outer_dof[i])
            outer_max = std::max(outer_max, std::abs(st.dofs[i]));
    CHECK(outer_max == 0.0);

    const CapacityResult cap = capacity(c.outer, c.of);
    CHECK(cap.cap > 0.0);
    CHECK(st.value <= cap.cap + 1e-10);
    CHECK(cap.zeta_min >= 0.0);
    CHECK(cap.zeta_max <= 1.0);
    for (Index i = 0; i < c.of.num_dofs(); ++i) {
        if (c.of.hole_dof[i])
            CHECK(cap.zeta[i] == 0.0);
        if (c.of.outer_dof[i])
            CHECK(cap.zeta[i] == 1.0);
    }
    // Condensers between the hole and the inscribed / circumscribed spheres.
    const double r = 0.25;
    const double lo = 4 * kPi / (1.0 / r - 2.0 / std::sqrt(3.0));
    const double hi = 4 * kPi / (1.0 / r - 2.0);
    CHECK(cap.cap >= lo);
    CHECK(cap.cap <= hi);
    CHECK_THROWS_AS(lambda_st(c.periodic, c.pf), PreconditionError);
    CHECK_THROWS_AS(capacity(c.periodic, c.pf), PreconditionError);
}

TEST_CASE("capacity approaches the Dirichlet eigenvalue as the hole shrinks")
{
    auto ratio = [](double eps) {
        const Cell c = make_cell(cell_hole_radius(eps, 3, 3), 2);
        return capacity(c.outer, c.of).cap / lambda_dir(c.periodic, c.pf).value;
    };
    const double coarse = ratio(0.5), fine = ratio(0.25);
    CHECK(std::abs(fine - 1.0) < std::abs(coarse - 1.0));
    CHECK(fine >= 0.9);
    CHECK(fine <= 1.1);
}

TEST_CASE("lambda(eps, kappa) identities at eps = 1/2")
{
    const Cell& c = half_cell();
    for (double kappa : {0.5, 2.0}) {
        const KappaEigen e = lambda_eps_kappa(c.periodic, c.pf, kappa, default_shift(0.25, kappa));
        CAPTURE(kappa);
        CHECK(e.sign_definite);
        CHECK((e.lambda > 0.0) == (kappa > 1.0));
        CHECK(e.constraint_value == doctest::Approx(kappa > 1.0 ? 1.0 : -1.0).epsilon(1e-8));
        CHECK(e.rayleigh_residual <= 1e-7);
        CHECK(e.bdav_residual <= 1e-6);
        // Independent evaluation of the Rayleigh identity and of the boundary-average identity.
        const SparseSym g = constraint_form(c.pf, kappa);
        CHECK(c.pf.A.quad_form(e.dofs) == doctest::Approx(e.lambda * g.quad_form(e.dofs)).epsilon(1e-7));
        const Vector ones(c.pf.num_dofs(), 1.0);
        const double avg = c.pf.B.bilinear(ones, e.dofs) / c.pf.s_h;
        const double integral = c.pf.M.bilinear(ones, e.dofs);
        CHECK(std::abs(avg - kappa * integral) <= 1e-6 * std::sqrt(c.pf.M.quad_form(e.dofs)));
        CHECK(e.integral == doctest::Approx(integral));
        CHECK(e.kappa == kappa);
    }
}

TEST_CASE("lambda(eps, kappa) is nondecreasing in kappa and respects the Dirichlet bound")
{
    const Cell& c = half_cell();
    const double dir = lambda_dir(c.periodic, c.pf).value;
    double prev = -INFINITY;
    for (double kappa : {0.3, 0.6, 0.9, 1.5, 2.0, 3.0}) {
        const KappaEigen e = lambda_eps_kappa(c.periodic, c.pf, kappa, default_shift(0.25, kappa));
        CHECK(e.lambda >= prev - 1e-8);
        prev = e.lambda;
        if (kappa < 1.0)
            CHECK(-kappa * e.lambda <= dir + 1e-10);
    }
}

TEST_CASE("Steklov-type upper bound with a single finite constant")
{
    // lambda <= Lambda^St / (1 - C kappa eps^2) for one C over the tested set.
    double c_req = 0.0, worst = 0.0;
    for (double eps : {0.5, 1.0 / 3.0, 0.25}) {
        const Cell c = make_cell(cell_hole_radius(eps, 3, 3), 2);
        const double st = lambda_st(c.outer, c.of).value;
        for (double kappa : {1.5, 2.0, 3.0, 5.0}) {
            const double r = cell_hole_radius(eps, 3, 3);
            const double lam = lambda_eps_kappa(c.periodic, c.pf, kappa, default_shift(r, kappa)).lambda;
            const double need = (1.0 - st / lam) / (kappa * eps * eps);
            c_req = std::max(c_req, need);
            worst = std::max(worst, kappa * eps * eps);
        }
    }
    MESSAGE("required constant C = " << c_req);
    CHECK(c_req * worst < 1.0);
}

TEST_CASE("lambda(eps, kappa) preconditions and fault injection")
{
    const Cell& c = half_cell();
    CHECK_THROWS_AS(lambda_eps_kappa(c.periodic, c.pf, 1.0, 1.0), PreconditionError);
    CHECK_THROWS_AS(lambda_eps_kappa(c.periodic, c.pf, -0.5, 1.0), PreconditionError);
    const double below = 0.99 / c.pf.vol_h;
    if (below > 1.0)
        CHECK_THROWS_AS(lambda_eps_kappa(c.periodic, c.pf, below, 1.0), PreconditionError);
    CHECK_THROWS_AS(lambda_eps_kappa(c.periodic, c.pf, 2.0, 0.0), PreconditionError);
    CHECK_THROWS_AS(lambda_eps_kappa(c.outer, c.of, 2.0, 1.0), PreconditionError);

    CellSolveOptions bad;
    bad.inject_constraint_sign_fault = true;
    bool rejected = false;
    try {
        const KappaEigen e = lambda_eps_kappa(c.periodic, c.pf, 0.3, default_shift(0.25, 0.3), bad);
        rejected = !(e.lambda < 0.0);
    } catch (const Error&) {
        rejected = true;
    }
    CHECK(rejected);
}

TEST_CASE("default shift")
{
    CHECK(default_shift(0.25, 2.0) == doctest::Approx(0.25 * 2 * kPi));
    CHECK(default_shift(0.25, 0.5) == doctest::Approx(-0.25 * 4 * kPi));
}

TEST_CASE("extrapolate_star on constructed series")
{
    const double c = 3.7;
    std::vector<std::pair<double, double>> exact, linear, quadratic;
    for (double e : {0.5, 1.0 / 3.0, 0.25}) {
        exact.emplace_back(e, c * e * e);
        linear.emplace_back(e, c * e * e * (1.0 + e));
        quadratic.emplace_back(e, c * e * e * (1.0 + e * e));
    }
    const ExtrapolationResult a = extrapolate_star(exact);
    CHECK(a.limit == doctest::Approx(c).epsilon(1e-14));
    CHECK(a.uncertainty <= 1e-13);
    CHECK(a.scaled.size() == 3);
    CHECK_FALSE(a.non_monotone);

    const ExtrapolationResult b = extrapolate_star(linear);
    CHECK(b.limit == doctest::Approx(c).epsilon(1e-12));
    CHECK(b.fitted_order == doctest::Approx(1.0).epsilon(1e-6));

    const ExtrapolationResult q = extrapolate_star(quadratic);
    CHECK(q.fitted_order == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(q.limit_polynomial == doctest::Approx(c).epsilon(1e-12));

    const ExtrapolationResult osc = extrapolate_star({{0.5, 0.25}, {0.4, 0.32}, {0.3, 0.05}});
    CHECK(osc.non_monotone);

    CHECK_THROWS_AS(extrapolate_star({{0.5, 1.0}}), PreconditionError);
    CHECK_THROWS_AS(extrapolate_star({{0.25, 1.0}, {0.5, 1.0}}), PreconditionError);
}

TEST_CASE("extrapolated lambda(eps, 2) approaches 2 pi")
{
    std::vector<std::pair<double, double>> s;
    for (double eps : {0.5, 1.0 / 3.0, 0.25}) {
        const double r = cell_hole_radius(eps, 3, 3);
        const Cell c = make_cell(r, 2);
        s.emplace_back(eps, lambda_eps_kappa(c.periodic, c.pf, 2.0, default_shift(r, 2.0)).lambda);
    }
    const ExtrapolationResult e = extrapolate_star(s);
    const double gap = (e.limit - 2 * kPi) / (2 * kPi);
    MESSAGE("extrapolated lambda_*(2) = " << e.limit << ", gap " << gap);
    CHECK(std::abs(gap) <= 0.15);
}

TEST_CASE("compute_cell_spectrum and the cell-extrapolated evaluator")
{
    const CellSpectrum s = compute_cell_spectrum(0.5, 0.25, 1, 2.0);
    CHECK(s.lambda_dir > 0.0);
    CHECK(s.lambda_st <= s.cap + 1e-10);
    REQUIRE(s.eig.has_value());
    CHECK(s.eig->lambda > 0.0);
    CHECK(s.lambda_dir_scaled() == doctest::Approx(s.lambda_dir * 4.0));

    const LambdaStarEvaluator ev = cell_extrapolated_evaluator({0.5, 1.0 / 3.0, 0.25}, 3.0, 1);
    CHECK(ev.id == EvaluatorId::cell_extrapolated);
    CHECK(ev.eval(1.0) == 0.0);
    CHECK(ev.eval(0.5) < ev.eval(0.7));
    CHECK(ev.eval(0.7) < 0.0);
    CHECK(ev.default_tol >= 1e-6);
    const auto r = kappa_star(4 * kPi, ev);
    CHECK(r.kappa_star > 0.0);
    CHECK(r.kappa_star < 1.0);
}
