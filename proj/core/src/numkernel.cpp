#include "robinhom/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "robinhom/error.hpp"

namespace robinhom {

SparseSym::SparseSym(Index dim, std::vector<Index> row_ptr, std::vector<Index> cols,
                     std::vector<double> values)
    : dim_(dim), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values))
{
    if (dim_ < 0 || row_ptr_.size() != static_cast<std::size_t>(dim_) + 1 || row_ptr_.front() != 0 ||
        static_cast<std::size_t>(row_ptr_.back()) != cols_.size() || cols_.size() != values_.size())
        throw PreconditionError("SparseSym: inconsistent CSR arrays");
    for (Index i = 0; i < dim_; ++i) {
        if (row_ptr_[i + 1] < row_ptr_[i])
            throw PreconditionError("SparseSym: row_ptr not monotone");
        for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            if (cols_[k] < 0 || cols_[k] >= dim_)
                throw PreconditionError("SparseSym: column index out of range");
            if (k > row_ptr_[i] && cols_[k] <= cols_[k - 1])
                throw PreconditionError("SparseSym: row " + std::to_string(i) + " not sorted");
        }
    }
}

SparseSym SparseSym::zeros_like(const SparseSym& pattern)
{
    SparseSym m = pattern;
    std::fill(m.values_.begin(), m.values_.end(), 0.0);
    return m;
}

SparseSym SparseSym::identity(Index dim)
{
    Vector d(static_cast<std::size_t>(dim), 1.0);
    return diagonal(d);
}

SparseSym SparseSym::diagonal(std::span<const double> d)
{
    const auto n = static_cast<Index>(d.size());
    std::vector<Index> rp(d.size() + 1), c(d.size());
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(c.begin(), c.end(), 0);
    return SparseSym(n, std::move(rp), std::move(c), Vector(d.begin(), d.end()));
}

SparseSym SparseSym::from_dense(Index dim, std::span<const double> dense)
{
    if (dense.size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim))
        throw PreconditionError("from_dense: size mismatch");
    std::vector<Index> rp{0}, c;
    Vector v;
    for (Index i = 0; i < dim; ++i) {
        for (Index j = 0; j < dim; ++j) {
            const double a = dense[static_cast<std::size_t>(i) * dim + j];
            if (a != 0.0 || i == j) {
                c.push_back(j);
                v.push_back(a);
            }
        }
        rp.push_back(static_cast<Index>(c.size()));
    }
    return SparseSym(dim, std::move(rp), std::move(c), std::move(v));
}

std::ptrdiff_t SparseSym::find(Index row, Index col) const
{
    const auto b = cols_.begin() + row_ptr_[row];
    const auto e = cols_.begin() + row_ptr_[row + 1];
    const auto it = std::lower_bound(b, e, col);
    if (it == e || *it != col)
        return -1;
    return it - cols_.begin();
}

double SparseSym::at(Index row, Index col) const
{
    const auto k = find(row, col);
    return k < 0 ? 0.0 : values_[static_cast<std::size_t>(k)];
}

void SparseSym::add(Index row, Index col, double v)
{
    const auto k = find(row, col);
    if (k < 0)
        throw PreconditionError("SparseSym::add: entry outside pattern");
    values_[static_cast<std::size_t>(k)] += v;
}

void SparseSym::multiply(std::span<const double> x, std::span<double> y) const
{
    for (Index i = 0; i < dim_; ++i) {
        double s = 0.0;
        for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            s += values_[k] * x[cols_[k]];
        y[i] = s;
    }
}

Vector SparseSym::operator*(std::span<const double> x) const
{
    Vector y(static_cast<std::size_t>(dim_));
    multiply(x, y);
    return y;
}

double SparseSym::quad_form(std::span<const double> x) const { return bilinear(x, x); }

double SparseSym::bilinear(std::span<const double> x, std::span<const double> y) const
{
    double total = 0.0;
    for (Index i = 0; i < dim_; ++i) {
        double s = 0.0;
        for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            s += values_[k] * y[cols_[k]];
        total += x[i] * s;
    }
    return total;
}

Vector SparseSym::diagonal_values() const
{
    Vector d(static_cast<std::size_t>(dim_), 0.0);
    for (Index i = 0; i < dim_; ++i)
        d[i] = at(i, i);
    return d;
}

Vector SparseSym::row_sums() const
{
    Vector s(static_cast<std::size_t>(dim_), 0.0);
    for (Index i = 0; i < dim_; ++i)
        for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            s[i] += values_[k];
    return s;
}

SparseSym SparseSym::restrict_to(std::span<const Index> keep) const
{
    std::vector<Index> new_index(static_cast<std::size_t>(dim_), -1);
    for (std::size_t i = 0; i < keep.size(); ++i)
        new_index[keep[i]] = static_cast<Index>(i);

    std::vector<Index> rp{0}, c;
    Vector v;
    std::vector<std::pair<Index, double>> row;
    for (const Index old : keep) {
        row.clear();
        for (Index k = row_ptr_[old]; k < row_ptr_[old + 1]; ++k) {
            const Index nc = new_index[cols_[k]];
            if (nc >= 0)
                row.emplace_back(nc, values_[k]);
        }
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [col, val] : row) {
            c.push_back(col);
            v.push_back(val);
        }
        rp.push_back(static_cast<Index>(c.size()));
    }
    return SparseSym(static_cast<Index>(keep.size()), std::move(rp), std::move(c), std::move(v));
}

double SparseSym::asymmetry() const
{
    double amax = 0.0, dmax = 0.0;
    for (Index i = 0; i < dim_; ++i) {
        for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            amax = std::max(amax, std::abs(values_[k]));
            const auto kt = find(cols_[k], i);
            const double t = kt < 0 ? 0.0 : values_[static_cast<std::size_t>(kt)];
            dmax = std::max(dmax, std::abs(values_[k] - t));
        }
    }
    return amax == 0.0 ? 0.0 : dmax / amax;
}

SparseSym linear_combination(double a, const SparseSym& x, double b, const SparseSym& y)
{
    if (x.dim() != y.dim())
        throw PreconditionError("linear_combination: dimension mismatch");
    std::vector<Index> rp{0}, c;
    Vector v;
    c.reserve(std::max(x.nnz(), y.nnz()));
    v.reserve(c.capacity());
    for (Index i = 0; i < x.dim(); ++i) {
        Index kx = x.row_ptr_[i], ex = x.row_ptr_[i + 1];
        Index ky = y.row_ptr_[i], ey = y.row_ptr_[i + 1];
        while (kx < ex || ky < ey) {
            const Index cx = kx < ex ? x.cols_[kx] : std::numeric_limits<Index>::max();
            const Index cy = ky < ey ? y.cols_[ky] : std::numeric_limits<Index>::max();
            if (cx == cy) {
                c.push_back(cx);
                v.push_back(a * x.values_[kx++] + b * y.values_[ky++]);
            } else if (cx < cy) {
                c.push_back(cx);
                v.push_back(a * x.values_[kx++]);
            } else {
                c.push_back(cy);
                v.push_back(b * y.values_[ky++]);
            }
        }
        rp.push_back(static_cast<Index>(c.size()));
    }
    return SparseSym(x.dim(), std::move(rp), std::move(c), std::move(v));
}

SparsityBuilder::SparsityBuilder(Index dim) : rows_(static_cast<std::size_t>(dim)) {}

void SparsityBuilder::add_clique(std::span<const Index> dofs)
{
    for (const Index i : dofs)
        for (const Index j : dofs)
            rows_[i].push_back(j);
}

SparseSym SparsityBuilder::build() const
{
    std::vector<Index> rp{0}, c;
    for (auto row : rows_) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        c.insert(c.end(), row.begin(), row.end());
        rp.push_back(static_cast<Index>(c.size()));
    }
    Vector v(c.size(), 0.0);
    return SparseSym(static_cast<Index>(rows_.size()), std::move(rp), std::move(c), std::move(v));
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double a, std::span<const double> x, std::span<double> y)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += a * x[i];
}

void scale(double a, std::span<double> x)
{
    for (auto& xi : x)
        xi *= a;
}

namespace {

Vector inverse_abs_diagonal(const SparseSym& K)
{
    Vector d = K.diagonal_values();
    for (auto& di : d)
        di = std::abs(di) > 0.0 ? 1.0 / std::abs(di) : 1.0;
    return d;
}

double relative_residual(const SparseSym& K, std::span<const double> x, std::span<const double> rhs)
{
    Vector r = K * x;
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = rhs[i] - r[i];
    const double nb = norm2(rhs);
    return nb == 0.0 ? norm2(r) : norm2(r) / nb;
}

} // namespace

Vector cg_solve(const SparseSym& K, std::span<const double> rhs, double tol, SolveReport* report,
                std::span<const double> x0, const IterateObserver& observer, int max_iter)
{
    const auto n = static_cast<std::size_t>(K.dim());
    if (rhs.size() != n)
        throw PreconditionError("cg_solve: rhs size mismatch");
    if (!(tol > 0.0 && tol < 1.0))
        throw PreconditionError("cg_solve: tol must lie in (0,1)");
    const int cap = max_iter > 0 ? max_iter : static_cast<int>(10 * std::max<std::size_t>(n, 1));

    Vector x(n, 0.0);
    const double nb = norm2(rhs);
    if (nb == 0.0) {
        if (report)
            *report = {0, 0.0};
        return x;
    }
    if (x0.size() == n)
        std::copy(x0.begin(), x0.end(), x.begin());

    const Vector dinv = inverse_abs_diagonal(K);
    Vector r = K * x;
    for (std::size_t i = 0; i < n; ++i)
        r[i] = rhs[i] - r[i];
    Vector z(n), p(n), q(n);
    for (std::size_t i = 0; i < n; ++i)
        z[i] = dinv[i] * r[i];
    p = z;
    double rz = dot(r, z);
    double res = norm2(r) / nb;

    int it = 0;
    while (res > tol) {
        if (it >= cap)
            throw NoConvergence("cg_solve: no convergence after " + std::to_string(cap) +
                                " iterations (relative residual " + std::to_string(res) + ")");
        K.multiply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0))
            throw NoConvergence("cg_solve: operator not positive definite along search direction");
        const double alpha = rz / pq;
        axpy(alpha, p, x);
        axpy(-alpha, q, r);
        ++it;
        if (observer)
            observer(it, x);
        res = norm2(r) / nb;
        if (res <= tol)
            break;
        for (std::size_t i = 0; i < n; ++i)
            z[i] = dinv[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    if (report)
        *report = {it, res};
    return x;
}

Vector minres_solve(const SparseSym& K, std::span<const double> rhs, double tol, SolveReport* report,
                    int max_iter)
{
    const auto n = static_cast<std::size_t>(K.dim());
    if (rhs.size() != n)
        throw PreconditionError("minres_solve: rhs size mismatch");
    const int cap = max_iter > 0 ? max_iter : static_cast<int>(20 * std::max<std::size_t>(n, 1));

    Vector x(n, 0.0);
    const double nb = norm2(rhs);
    if (nb == 0.0) {
        if (report)
            *report = {0, 0.0};
        return x;
    }
    const Vector dinv = inverse_abs_diagonal(K);

    // Paige-Saunders recurrences with an SPD diagonal preconditioner.
    Vector r1(rhs.begin(), rhs.end()), r2 = r1, y(n), v(n), w(n, 0.0), w1(n), w2(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = dinv[i] * r1[i];
    const double beta1 = std::sqrt(dot(r1, y));
    double beta = beta1, oldb = 0.0, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;
    double target = tol;

    int it = 0;
    double res = 1.0;
    while (true) {
        if (it >= cap)
            throw IndefiniteBreakdown("minres_solve: no convergence after " + std::to_string(cap) +
                                      " iterations (relative residual " + std::to_string(res) + ")");
        ++it;
        const double s = 1.0 / beta;
        for (std::size_t i = 0; i < n; ++i)
            v[i] = s * y[i];
        K.multiply(v, y);
        if (it >= 2)
            axpy(-beta / oldb, r1, y);
        const double alfa = dot(v, y);
        axpy(-alfa / beta, r2, y);
        r1.swap(r2);
        r2 = y;
        for (std::size_t i = 0; i < n; ++i)
            y[i] = dinv[i] * r2[i];
        oldb = beta;
        const double bb = dot(r2, y);
        if (bb < 0.0)
            throw IndefiniteBreakdown("minres_solve: preconditioner lost positivity");
        beta = std::sqrt(bb);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        const double gamma = std::max(std::hypot(gbar, beta), std::numeric_limits<double>::min());
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1.swap(w2);
        w2.swap(w);
        for (std::size_t i = 0; i < n; ++i)
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        axpy(phi, w, x);

        const bool lanczos_done = beta <= 1e-14 * beta1;
        if (phibar <= target * beta1 || lanczos_done || it % 200 == 0) {
            res = relative_residual(K, x, rhs);
            if (res <= tol)
                break;
            if (lanczos_done)
                throw IndefiniteBreakdown("minres_solve: Lanczos breakdown with residual " +
                                          std::to_string(res));
            if (phibar <= target * beta1)
                target *= 0.1;
        }
    }
    if (report)
        *report = {it, res};
    return x;
}

bool is_sign_definite(std::span<const double> v, double tol)
{
    double vmax = 0.0;
    for (double vi : v)
        vmax = std::max(vmax, std::abs(vi));
    if (vmax == 0.0)
        return false;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double vi : v) {
        lo = std::min(lo, vi / vmax);
        hi = std::max(hi, vi / vmax);
    }
    return lo >= -tol || -hi >= -tol;
}

namespace {

void orient_by_largest_entry(Vector& v)
{
    std::size_t imax = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[imax]))
            imax = i;
    if (!v.empty() && v[imax] < 0.0)
        scale(-1.0, v);
}

Vector default_start(std::size_t n)
{
    // Constant plus a small deterministic perturbation so the start vector is
    // not an exact kernel vector of a Neumann-type operator.
    std::mt19937_64 gen(0x5eed5eedULL);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    Vector x(n);
    for (auto& xi : x)
        xi = 1.0 + u(gen);
    return x;
}

double abs_quad_form(const SparseSym& G, std::span<const double> x)
{
    double total = 0.0;
    const auto rp = G.row_ptr();
    const auto c = G.cols();
    const auto val = G.values();
    for (Index i = 0; i < G.dim(); ++i)
        for (Index k = rp[i]; k < rp[i + 1]; ++k)
            total += std::abs(val[k] * x[i] * x[c[k]]);
    return total;
}

double max_abs_row_sum(const SparseSym& m)
{
    double best = 0.0;
    const auto rp = m.row_ptr();
    const auto val = m.values();
    for (Index i = 0; i < m.dim(); ++i) {
        double s = 0.0;
        for (Index k = rp[i]; k < rp[i + 1]; ++k)
            s += std::abs(val[k]);
        best = std::max(best, s);
    }
    return best;
}

} // namespace

EigenPair inverse_power(const SparseSym& A, const SparseSym& Mlike, const EigenOptions& opts)
{
    const auto n = static_cast<std::size_t>(A.dim());
    if (Mlike.dim() != A.dim())
        throw PreconditionError("inverse_power: dimension mismatch");
    Vector x = opts.initial && opts.initial->size() == n ? *opts.initial : default_start(n);

    EigenPair out;
    Vector guess;
    double lambda = 0.0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        Vector mx = Mlike * x;
        if (norm2(mx) == 0.0)
            throw ZeroPencil("inverse_power: Mlike annihilates the iterate");
        if (lambda > 0.0) {
            guess = x;
            scale(1.0 / lambda, guess);
        }
        Vector y = cg_solve(A, mx, opts.linear_tol, nullptr, guess);
        const double ymy = Mlike.quad_form(y);
        if (!(ymy > 0.0))
            throw ZeroPencil("inverse_power: iterate has zero Mlike-norm");
        scale(1.0 / std::sqrt(ymy), y);
        const Vector ay = A * y;
        const Vector my = Mlike * y;
        lambda = dot(y, ay);
        Vector r = ay;
        axpy(-lambda, my, r);
        const double nay = norm2(ay);
        const double res = nay > 0.0 ? norm2(r) / nay : norm2(r);
        x = std::move(y);
        if (res <= opts.tol) {
            orient_by_largest_entry(x);
            out.lambda = lambda;
            out.residual = res;
            out.iterations = it;
            out.constraint_value = 1.0;
            out.sign_definite = is_sign_definite(x);
            out.vector = std::move(x);
            return out;
        }
    }
    throw NoConvergence("inverse_power: no convergence after " + std::to_string(opts.max_iter) +
                        " iterations");
}

EigenPair pencil_nearest(const SparseSym& A, const SparseSym& G, double shift,
                         const EigenOptions& opts)
{
    const auto n = static_cast<std::size_t>(A.dim());
    if (G.dim() != A.dim())
        throw PreconditionError("pencil_nearest: dimension mismatch");
    const SparseSym K = linear_combination(1.0, A, -shift, G);
    const double norm_a = max_abs_row_sum(A);
    const double norm_g = max_abs_row_sum(G);
    constexpr double kZeroEigenScale = 1e-8;
    Vector x = opts.initial && opts.initial->size() == n ? *opts.initial : default_start(n);

    for (int it = 1; it <= opts.max_iter; ++it) {
        const Vector gx = G * x;
        if (norm2(gx) == 0.0)
            throw ZeroPencil("pencil_nearest: G annihilates the iterate");
        Vector y = minres_solve(K, gx, opts.linear_tol);
        const double ygy = G.quad_form(y);
        const double gscale = abs_quad_form(G, y);
        if (!(std::abs(ygy) > 1e-13 * gscale)) {
            // Constraint value too close to zero for a Rayleigh estimate.
            scale(1.0 / norm2(y), y);
            x = std::move(y);
            continue;
        }
        scale(1.0 / std::sqrt(std::abs(ygy)), y);
        const Vector ay = A * y;
        const Vector gy = G * y;
        const double cval = dot(y, gy);
        const double lambda = dot(y, ay) / cval;
        Vector r = ay;
        axpy(-lambda, gy, r);
        // Relative to ||Av||; for a numerically zero eigenvalue Av is pure
        // roundoff, so the normwise backward error is used instead.
        const double scale_ref = (norm_a + std::abs(lambda) * norm_g) * norm2(y);
        double denom = std::max(norm2(ay), std::abs(lambda) * norm2(gy));
        if (denom <= kZeroEigenScale * scale_ref)
            denom = scale_ref;
        const double res = norm2(r) / std::max(denom, std::numeric_limits<double>::min());
        x = std::move(y);
        if (res <= opts.tol) {
            orient_by_largest_entry(x);
            EigenPair out;
            out.lambda = lambda;
            out.residual = res;
            out.iterations = it;
            out.constraint_value = cval > 0.0 ? 1.0 : -1.0;
            out.sign_definite = is_sign_definite(x);
            out.vector = std::move(x);
            return out;
        }
    }
    throw NoConvergence("pencil_nearest: no convergence after " + std::to_string(opts.max_iter) +
                        " iterations");
}

} // namespace robinhom
