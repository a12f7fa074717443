#pragma once

#include <Eigen/Dense>

namespace qvlc {

/// minimize cost.x  subject to  eq*x == eq_rhs,  le*x <= le_rhs,  x >= 0.
/// Either constraint block may have zero rows.
struct LinearProgram {
    Eigen::VectorXd cost;
    Eigen::MatrixXd eq;
    Eigen::VectorXd eq_rhs;
    Eigen::MatrixXd le;
    Eigen::VectorXd le_rhs;

    int variables() const noexcept { return static_cast<int>(cost.size()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Eigen::VectorXd x;       // basic feasible solution when Optimal
    double objective = 0.0;  // cost.x
};

/// Dense two-phase primal simplex with Bland's anti-cycling rule. Returns a
/// vertex of the feasible polytope; the final basis is re-solved with a
/// column-pivoting QR so the returned vertex is accurate to round-off.
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace qvlc
