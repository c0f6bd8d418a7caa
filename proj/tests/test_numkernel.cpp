#include <Eigen/Dense>
#include <doctest.h>

#include <numbers>
#include <random>

#include "robinhom/error.hpp"
#include "robinhom/numkernel.hpp"
#include "test_support.hpp"

using namespace robinhom;

namespace {

SparseSym random_spd(int n, unsigned seed, double shift)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            B(i, j) = u(rng);
    Eigen::MatrixXd S = B * B.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
    std::vector<double> rowmajor(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            rowmajor[static_cast<std::size_t>(i) * n + j] = S(i, j);
    return SparseSym::from_dense(n, rowmajor);
}

// Q1 stiffness and consistent mass of the 1D Dirichlet problem on (0,1).
std::pair<SparseSym, SparseSym> laplace_1d(int intervals)
{
    const int n = intervals - 1;
    const double h = 1.0 / intervals;
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), m(a.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        a[i * n + i] = 2.0 / h;
        m[i * n + i] = 4.0 * h / 6.0;
        if (i + 1 < n) {
            a[i * n + i + 1] = a[(i + 1) * n + i] = -1.0 / h;
            m[i * n + i + 1] = m[(i + 1) * n + i] = h / 6.0;
        }
    }
    return {SparseSym::from_dense(n, a), SparseSym::from_dense(n, m)};
}

} // namespace

TEST_CASE("sparse matrix basics")
{
    const SparseSym m = SparseSym::from_dense(3, std::vector<double>{4, 1, 0, 1, 3, 2, 0, 2, 5});
    CHECK(m.dim() == 3);
    CHECK(m.nnz() == 7);
    CHECK(m.asymmetry() == 0.0);
    CHECK(m.at(1, 2) == 2.0);
    CHECK(m.at(0, 2) == 0.0);
    CHECK(m.find(0, 2) == -1);
    const Vector x{1.0, -1.0, 2.0};
    const Vector y = m * x;
    CHECK(y == Vector{3.0, 2.0, 8.0});
    CHECK(m.quad_form(x) == doctest::Approx(3.0 - 2.0 + 16.0));
    for (Index i = 0; i < m.dim(); ++i)
        for (Index k = m.row_ptr()[i] + 1; k < m.row_ptr()[i + 1]; ++k)
            CHECK(m.cols()[k - 1] < m.cols()[k]);

    const SparseSym sub = m.restrict_to(std::vector<Index>{0, 2});
    CHECK(sub.dim() == 2);
    CHECK(sub.at(1, 1) == 5.0);
    const SparseSym lc = linear_combination(2.0, m, -1.0, SparseSym::identity(3));
    CHECK(lc.at(0, 0) == 7.0);
    CHECK(lc.at(0, 1) == 2.0);

    CHECK_THROWS_AS(SparseSym(2, {0, 1, 2}, {1, 0}, {1.0}), PreconditionError);
}

TEST_CASE("cg_solve: 2x2 and identity")
{
    const SparseSym k = SparseSym::from_dense(2, std::vector<double>{2, 1, 1, 2});
    const Vector x = cg_solve(k, std::vector<double>{3, 3}, 1e-14);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-13));

    SolveReport rep;
    const Vector r{0.3, -1.0, 2.5, 4.0};
    const Vector y = cg_solve(SparseSym::identity(4), r, 1e-12, &rep);
    CHECK(rep.iterations == 1);
    for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(y[i] == doctest::Approx(r[i]));
}

TEST_CASE("cg_solve matches a dense Cholesky solve on a random SPD matrix")
{
    const SparseSym k = random_spd(50, 12345, 1.0);
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector rhs(50);
    for (auto& v : rhs)
        v = u(rng);
    SolveReport rep;
    const Vector x = cg_solve(k, rhs, 1e-13, &rep);
    const Eigen::VectorXd ref = dense(k).llt().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), 50));
    double err = 0.0;
    for (int i = 0; i < 50; ++i)
        err = std::max(err, std::abs(x[i] - ref(i)));
    CHECK(err / ref.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(rep.relative_residual <= 1e-13);
}

TEST_CASE("cg_solve error decreases monotonically in the energy norm")
{
    const SparseSym k = random_spd(50, 99, 0.5);
    Vector rhs(50, 1.0);
    const Eigen::MatrixXd kd = dense(k);
    const Eigen::VectorXd xs = kd.llt().solve(Eigen::VectorXd::Ones(50));
    std::vector<double> knorm;
    cg_solve(k, rhs, 1e-12, nullptr, {}, [&](int, std::span<const double> it) {
        Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(it.data(), 50) - xs;
        knorm.push_back(std::sqrt(e.dot(kd * e)));
    });
    REQUIRE(knorm.size() > 3);
    for (std::size_t i = 1; i < knorm.size(); ++i)
        CHECK(knorm[i] <= knorm[i - 1] * (1.0 + 1e-12) + 1e-14);
}

TEST_CASE("cg_solve iteration cap raises NoConvergence")
{
    const SparseSym k = random_spd(30, 5, 0.01);
    CHECK_THROWS_AS(cg_solve(k, Vector(30, 1.0), 1e-14, nullptr, {}, {}, 2), NoConvergence);
}

TEST_CASE("minres_solve handles symmetric indefinite systems")
{
    const int n = 40;
    Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(dense(random_spd(n, 3, 0.0))).householderQ();
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i)
        d(i) = (i % 2 ? -1.0 : 1.0) * (1.0 + i);
    const Eigen::MatrixXd K = Q * d.asDiagonal() * Q.transpose();
    std::vector<double> rowmajor(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            rowmajor[i * n + j] = 0.5 * (K(i, j) + K(j, i));
    const SparseSym ks = SparseSym::from_dense(n, rowmajor);
    Vector rhs(n);
    for (int i = 0; i < n; ++i)
        rhs[i] = std::sin(i + 1.0);
    const Vector x = minres_solve(ks, rhs, 1e-13);
    const Eigen::VectorXd ref = dense(ks).partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), n));
    for (int i = 0; i < n; ++i)
        CHECK(x[i] == doctest::Approx(ref(i)).epsilon(1e-8));
}

TEST_CASE("inverse_power: diagonal examples")
{
    const SparseSym a = SparseSym::diagonal(std::vector<double>{2.0, 3.0});
    EigenOptions tight;
    tight.tol = 1e-10;
    tight.linear_tol = 1e-14;
    const EigenPair p = inverse_power(a, SparseSym::identity(2), tight);
    CHECK(p.lambda == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(std::abs(p.vector[0]) == doctest::Approx(1.0));
    CHECK(std::abs(p.vector[1]) <= 1e-8);

    const EigenPair q = inverse_power(a, SparseSym::diagonal(std::vector<double>{1.0, 0.0}));
    CHECK(q.lambda == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(q.vector[0] * q.vector[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(inverse_power(a, SparseSym::diagonal(std::vector<double>{0.0, 0.0})), ZeroPencil);
}

TEST_CASE("inverse_power: 1D Dirichlet Laplacian gives pi^2")
{
    const auto [a, m] = laplace_1d(64);
    const EigenPair p = inverse_power(a, m);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(rel_err(p.lambda, pi2) <= 5e-3);
    CHECK(p.sign_definite);
    CHECK(m.quad_form(p.vector) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pencil_nearest: diagonal indefinite pencil")
{
    const SparseSym a = SparseSym::diagonal(std::vector<double>{1.0, 2.0});
    const SparseSym g = SparseSym::diagonal(std::vector<double>{1.0, -1.0});
    const EigenPair p = pencil_nearest(a, g, 0.5);
    CHECK(p.lambda == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(p.constraint_value > 0.0);
    const EigenPair q = pencil_nearest(a, g, -1.5);
    CHECK(q.lambda == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK(q.constraint_value < 0.0);
    for (const EigenPair* e : {&p, &q}) {
        CHECK(std::abs(g.quad_form(e->vector)) == doctest::Approx(1.0));
        // Rayleigh identity
        CHECK(a.quad_form(e->vector) == doctest::Approx(e->lambda * g.quad_form(e->vector)));
    }
}

TEST_CASE("pencil_nearest agrees with inverse_power on definite pencils")
{
    const SparseSym a = random_spd(30, 41, 1.0);
    const SparseSym m = random_spd(30, 42, 2.0);
    EigenOptions opts;
    opts.tol = 1e-12;
    opts.linear_tol = 1e-14;
    opts.max_iter = 2000;
    const EigenPair p = inverse_power(a, m, opts);
    const EigenPair q = pencil_nearest(a, m, 0.0, opts);
    CHECK(rel_err(q.lambda, p.lambda) <= 1e-8);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(a), dense(m));
    CHECK(rel_err(p.lambda, es.eigenvalues()(0)) <= 1e-8);
}

TEST_CASE("pencil_nearest converges to a zero eigenvalue")
{
    // Neumann-type stiffness: constants span the kernel.
    const SparseSym a = SparseSym::from_dense(3, std::vector<double>{1, -1, 0, -1, 2, -1, 0, -1, 1});
    const SparseSym g = SparseSym::diagonal(std::vector<double>{1.0, -0.5, 1.0});
    EigenOptions opts;
    opts.tol = 1e-10;
    const EigenPair p = pencil_nearest(a, g, -0.1, opts);
    CHECK(std::abs(p.lambda) <= 1e-10);
    CHECK(p.sign_definite);
    CHECK(p.residual <= 1e-10);
}

TEST_CASE("pencil_nearest reports a vanishing G as ZeroPencil")
{
    const SparseSym a = SparseSym::identity(2);
    const SparseSym g = SparseSym::diagonal(std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(pencil_nearest(a, g, 0.5), ZeroPencil);
}

TEST_CASE("is_sign_definite")
{
    CHECK(is_sign_definite(std::vector<double>{1.0, 0.5, 0.0}));
    CHECK(is_sign_definite(std::vector<double>{-1.0, -0.5, -1e-12}));
    CHECK(is_sign_definite(std::vector<double>{1.0, -1e-9}));
    CHECK_FALSE(is_sign_definite(std::vector<double>{1.0, -1e-6}));
    CHECK_FALSE(is_sign_definite(std::vector<double>{1.0, -0.5, 0.2}));
}

TEST_CASE("vector helpers")
{
    Vector y{1.0, 2.0};
    axpy(2.0, std::vector<double>{1.0, -1.0}, y);
    CHECK(y == Vector{3.0, 0.0});
    scale(0.5, y);
    CHECK(y == Vector{1.5, 0.0});
    CHECK(dot(y, y) == 2.25);
    CHECK(norm2(std::vector<double>{3.0, 4.0}) == 5.0);
}
