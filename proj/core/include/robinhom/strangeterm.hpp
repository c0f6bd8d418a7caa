#pragma once

// kappa_*(beta) and the homogenised zero-order coefficient beta kappa_*(beta).

#include <functional>
#include <string>
#include <vector>

namespace robinhom {

enum class EvaluatorId { closed_form, exterior_numeric, cell_extrapolated };

const char* to_string(EvaluatorId id);

/// A monotone nondecreasing evaluator kappa -> lambda_*(kappa) on (0, 1].
struct LambdaStarEvaluator {
    EvaluatorId id = EvaluatorId::closed_form;
    std::function<double(double)> eval;
    double default_tol = 1e-10;  ///< bracket width used when the caller passes 0
};

LambdaStarEvaluator closed_form_evaluator(int n = 3);
LambdaStarEvaluator exterior_numeric_evaluator(int n = 3, double R = 1000.0, int m = 512);

struct StrangeTermResult {
    double beta = 0.0;
    double kappa_star = 0.0;
    double strange_term = 0.0;
    EvaluatorId evaluator = EvaluatorId::closed_form;
    int iterations = 0;
    double bracket_width = 0.0;
    double residual = 0.0;  ///< |lambda_*(kappa_star) + beta|
};

/// Solves -lambda_*(kappa) = beta for kappa in (0,1) by bisection, finishing
/// with a secant step inside the final bracket. The lower end of the bracket
/// is halved until -lambda_* exceeds beta; BracketFailure if that never
/// happens or the sign change is missing.
StrangeTermResult kappa_star(double beta, const LambdaStarEvaluator& evaluator,
                             double tol_bracket = 0.0);

/// Per-beta results; betas must be positive and strictly increasing.
std::vector<StrangeTermResult> strange_term_curve(const std::vector<double>& betas,
                                                  const LambdaStarEvaluator& evaluator,
                                                  double tol_bracket = 0.0);

/// Closed form sigma_n (n-2) beta / (sigma_n (n-2) + beta).
double strange_term_ball(double beta, int n);

} // namespace robinhom
