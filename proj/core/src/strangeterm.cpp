#include "robinhom/strangeterm.hpp"

#include <cmath>

#include "robinhom/error.hpp"
#include "robinhom/exterior.hpp"

namespace robinhom {

const char* to_string(EvaluatorId id)
{
    switch (id) {
    case EvaluatorId::closed_form: return "closed_form";
    case EvaluatorId::exterior_numeric: return "exterior_numeric";
    case EvaluatorId::cell_extrapolated: return "cell_extrapolated";
    }
    return "unknown";
}

LambdaStarEvaluator closed_form_evaluator(int n)
{
    return {EvaluatorId::closed_form, [n](double k) { return lambda_star_ball(k, n); }, 1e-10};
}

LambdaStarEvaluator exterior_numeric_evaluator(int n, double R, int m)
{
    return {EvaluatorId::exterior_numeric, [=](double k) { return exterior_numeric(k, n, R, m); }, 1e-6};
}

double strange_term_ball(double beta, int n)
{
    const double c = star_constants(n).cap_star;
    return c * beta / (c + beta);
}

StrangeTermResult kappa_star(double beta, const LambdaStarEvaluator& evaluator, double tol_bracket)
{
    if (!(beta > 0.0))
        throw PreconditionError("kappa_star: beta must be positive");
    if (!evaluator.eval)
        throw PreconditionError("kappa_star: empty evaluator");
    const double tol = tol_bracket > 0.0 ? tol_bracket : evaluator.default_tol;

    // g decreases in kappa: g(lo) > 0 > g(hi).
    auto g = [&](double k) { return -evaluator.eval(k) - beta; };
    double hi = 1.0, g_hi = g(hi);
    if (!(g_hi < 0.0))
        throw BracketFailure("kappa_star: -lambda_*(1) - beta is not negative");
    double lo = 0.5, g_lo = g(lo);
    int shrinks = 0;
    while (!(g_lo > 0.0)) {
        if (g_lo == 0.0) {
            StrangeTermResult r{beta, lo, beta * lo, evaluator.id, 0, 0.0, 0.0};
            return r;
        }
        hi = lo;
        g_hi = g_lo;
        lo *= 0.5;
        if (++shrinks > 200)
            throw BracketFailure("kappa_star: -lambda_* never exceeds beta near 0");
        g_lo = g(lo);
    }

    int it = 0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        const double g_mid = g(mid);
        ++it;
        if (g_mid == 0.0) {
            lo = hi = mid;
            g_lo = g_hi = 0.0;
            break;
        }
        if (g_mid > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    double k = lo == hi ? lo : lo + (hi - lo) * g_lo / (g_lo - g_hi);
    if (!(k >= lo && k <= hi))
        k = 0.5 * (lo + hi);

    StrangeTermResult r;
    r.beta = beta;
    r.kappa_star = k;
    r.strange_term = beta * k;
    r.evaluator = evaluator.id;
    r.iterations = it;
    r.bracket_width = hi - lo;
    r.residual = std::abs(evaluator.eval(k) + beta);
    return r;
}

std::vector<StrangeTermResult> strange_term_curve(const std::vector<double>& betas,
                                                  const LambdaStarEvaluator& evaluator,
                                                  double tol_bracket)
{
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0))
            throw PreconditionError("strange_term_curve: betas must be positive");
        if (i > 0 && !(betas[i] > betas[i - 1]))
            throw PreconditionError("strange_term_curve: betas must be strictly increasing");
    }
    std::vector<StrangeTermResult> out;
    out.reserve(betas.size());
    for (const double b : betas)
        out.push_back(kappa_star(b, evaluator, tol_bracket));
    return out;
}

} // namespace robinhom
