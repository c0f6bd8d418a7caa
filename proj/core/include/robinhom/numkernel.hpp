#pragma once

// Sparse symmetric linear algebra: CSR storage, Jacobi-preconditioned CG,
// MINRES for symmetric indefinite operators, and the two eigen-iterations
// used by the cell problems.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace robinhom {

using Index = std::int32_t;
using Vector = std::vector<double>;

/// Structurally symmetric sparse matrix in compressed row storage.
/// Columns within a row are sorted ascending.
class SparseSym {
public:
    SparseSym() = default;

    /// Takes ownership of CSR arrays. Throws PreconditionError when the
    /// arrays are inconsistent or a row is not sorted.
    SparseSym(Index dim, std::vector<Index> row_ptr, std::vector<Index> cols,
              std::vector<double> values);

    /// Matrix with the same pattern as `pattern` and zero values.
    static SparseSym zeros_like(const SparseSym& pattern);
    static SparseSym identity(Index dim);
    static SparseSym diagonal(std::span<const double> d);
    /// Row-major dense input; entries with |a_ij| == 0 are dropped except on
    /// the diagonal.
    static SparseSym from_dense(Index dim, std::span<const double> dense);

    Index dim() const { return dim_; }
    std::size_t nnz() const { return values_.size(); }

    std::span<const Index> row_ptr() const { return row_ptr_; }
    std::span<const Index> cols() const { return cols_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Slot of (row, col) in values(), or -1 if not in the pattern.
    std::ptrdiff_t find(Index row, Index col) const;
    double at(Index row, Index col) const;
    /// Adds `v` at (row, col); the entry must exist in the pattern.
    void add(Index row, Index col, double v);

    void multiply(std::span<const double> x, std::span<double> y) const;
    Vector operator*(std::span<const double> x) const;
    double quad_form(std::span<const double> x) const;
    double bilinear(std::span<const double> x, std::span<const double> y) const;
    Vector diagonal_values() const;
    Vector row_sums() const;

    /// Submatrix on the listed rows/columns (order preserved).
    SparseSym restrict_to(std::span<const Index> keep) const;

    /// Largest |a_ij - a_ji| relative to the largest |a_ij|.
    double asymmetry() const;

    /// a*X + b*Y over the union pattern; summation order is fixed.
    friend SparseSym linear_combination(double a, const SparseSym& x, double b,
                                        const SparseSym& y);

private:
    Index dim_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<Index> cols_;
    std::vector<double> values_;
};

SparseSym linear_combination(double a, const SparseSym& x, double b, const SparseSym& y);

/// Incremental pattern builder: register element connectivity, then freeze.
class SparsityBuilder {
public:
    explicit SparsityBuilder(Index dim);
    void add_clique(std::span<const Index> dofs);
    SparseSym build() const;

private:
    std::vector<std::vector<Index>> rows_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);

struct SolveReport {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Called with (iteration, current iterate) after every CG update.
using IterateObserver = std::function<void(int, std::span<const double>)>;

/// Jacobi-preconditioned conjugate gradients. Stops when
/// ||K x - rhs|| <= tol ||rhs||; throws NoConvergence after 10*dim
/// iterations (or `max_iter` when positive).
Vector cg_solve(const SparseSym& K, std::span<const double> rhs, double tol = 1e-9,
                SolveReport* report = nullptr, std::span<const double> x0 = {},
                const IterateObserver& observer = {}, int max_iter = 0);

/// Preconditioned MINRES for symmetric, possibly indefinite K, with the
/// SPD preconditioner diag(|K_ii|). Throws IndefiniteBreakdown when the
/// Lanczos process breaks down or the residual stalls past the cap.
Vector minres_solve(const SparseSym& K, std::span<const double> rhs, double tol = 1e-9,
                    SolveReport* report = nullptr, int max_iter = 0);

struct EigenPair {
    double lambda = 0.0;
    Vector vector;
    /// ||A v - lambda G v|| / ||A v||; for a numerically zero eigenvalue the
    /// normwise backward error ||r|| / ((||A|| + |lambda| ||G||) ||v||).
    double residual = 0.0;
    int iterations = 0;
    bool sign_definite = false;
    double constraint_value = 0.0;  ///< v^T G v after normalisation (+-1 or 1)
};

struct EigenOptions {
    double tol = 1e-7;          ///< eigen residual
    double linear_tol = 1e-9;   ///< inner solves
    int max_iter = 500;
    std::optional<Vector> initial;
};

/// Smallest lambda with A v = lambda Mlike v for A SPD and Mlike PSD,
/// by inverse iteration with CG inner solves. Returns v with v^T Mlike v = 1.
EigenPair inverse_power(const SparseSym& A, const SparseSym& Mlike,
                        const EigenOptions& opts = {});

/// Eigenpair of A v = lambda G v nearest `shift` by shift-and-invert with
/// MINRES inner solves. A symmetric PSD, G symmetric indefinite. The vector
/// is scaled so |v^T G v| = 1; constraint_value carries the sign.
EigenPair pencil_nearest(const SparseSym& A, const SparseSym& G, double shift,
                         const EigenOptions& opts = {});

/// Sign-definiteness test: after scaling max|v_i| = 1, min_i s*v_i >= -tol
/// for s = +1 or s = -1.
bool is_sign_definite(std::span<const double> v, double tol = 1e-8);

} // namespace robinhom
