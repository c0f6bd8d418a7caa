#pragma once

// Acceptance suite shared by `robinhom validate` and the acceptance test.

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "robinhom/assembly.hpp"

namespace robinhom::acceptance {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    bool skipped = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;
};

struct Options {
    bool quick = false;
    /// Flip the bulk sign of the constraint form in every lambda(eps, kappa) solve.
    bool inject_constraint_sign_fault = false;
    std::set<int> only;  ///< empty: all criteria
    int threads = 1;
};

/// Criteria run by --quick: closed forms and small meshes.
const std::set<int>& quick_subset();

int criterion_count();
std::string criterion_title(int id);

/// Runs the selected criteria in order; `report` sees each result as soon as
/// it is available.
std::vector<CriterionResult> run(const Options& opts,
                                 const std::function<void(const CriterionResult&)>& report = {});

/// Forms on the first block of a cell mesh (hexes of one cube face and its
/// hole faces), renumbered densely. Level 1 gives 36 dofs.
FormSet block_subproblem(double r_cell, int level, OuterMode mode = OuterMode::dirichlet_outer);

/// One table line: "criterion  3  PASS  ...".
std::string format_line(const CriterionResult& r);

} // namespace robinhom::acceptance
