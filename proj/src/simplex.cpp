#include "qvlc/simplex.hpp"

#include "qvlc/errors.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace qvlc {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;
constexpr double kFeasTol = 1e-9;

// Tableau over the standard form  A z = b,  z >= 0,  b >= 0.
class Tableau {
public:
    Tableau(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {}

    int rows() const { return static_cast<int>(a_.rows()); }
    int cols() const { return static_cast<int>(a_.cols()); }

    std::vector<int>& basis() { return basis_; }

    void pivot(int r, int c) {
        const double p = a_(r, c);
        a_.row(r) /= p;
        b_(r) /= p;
        for (int i = 0; i < rows(); ++i) {
            if (i == r) continue;
            const double f = a_(i, c);
            if (f == 0.0) continue;
            a_.row(i) -= f * a_.row(r);
            b_(i) -= f * b_(r);
        }
        basis_[r] = c;
    }

    // Minimises cost over the columns flagged in `allowed`. Returns false if
    // the problem is unbounded.
    bool optimise(const Eigen::VectorXd& cost, const std::vector<char>& allowed) {
        const int max_iter = 50 * (rows() + cols()) + 1000;
        for (int iter = 0; iter < max_iter; ++iter) {
            // Bland: lowest-index column with negative reduced cost enters.
            int enter = -1;
            for (int c = 0; c < cols(); ++c) {
                if (!allowed[c] || in_basis(c)) continue;
                double reduced = cost(c);
                for (int r = 0; r < rows(); ++r) reduced -= cost(basis_[r]) * a_(r, c);
                if (reduced < -kCostTol) {
                    enter = c;
                    break;
                }
            }
            if (enter < 0) return true;

            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < rows(); ++r) {
                if (a_(r, enter) <= kPivotTol) continue;
                const double ratio = b_(r) / a_(r, enter);
                if (ratio < best - 1e-14 || (ratio <= best + 1e-14 && leave >= 0 && basis_[r] < basis_[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        throw Error("simplex: iteration limit reached");
    }

    bool in_basis(int c) const {
        for (int v : basis_) {
            if (v == c) return true;
        }
        return false;
    }

    double value(const Eigen::VectorXd& cost) const {
        double v = 0.0;
        for (int r = 0; r < rows(); ++r) v += cost(basis_[r]) * b_(r);
        return v;
    }

    const Eigen::MatrixXd& a() const { return a_; }

    void drop_row(int r) {
        const int n = rows() - 1;
        Eigen::MatrixXd a(n, cols());
        Eigen::VectorXd b(n);
        std::vector<int> basis;
        for (int i = 0, k = 0; i <= n; ++i) {
            if (i == r) continue;
            a.row(k) = a_.row(i);
            b(k) = b_(i);
            basis.push_back(basis_[i]);
            ++k;
        }
        a_ = std::move(a);
        b_ = std::move(b);
        basis_ = std::move(basis);
    }

private:
    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    std::vector<int> basis_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
    const int n = lp.variables();
    const int n_eq = static_cast<int>(lp.eq.rows());
    const int n_le = static_cast<int>(lp.le.rows());
    if ((n_eq > 0 && lp.eq.cols() != n) || (n_le > 0 && lp.le.cols() != n) || lp.eq_rhs.size() != n_eq ||
        lp.le_rhs.size() != n_le) {
        throw DimensionError("solve_lp: inconsistent constraint shapes");
    }
    const int m = n_eq + n_le;

    // Standard form: [x | slacks], each row scaled to unit max-norm, rhs >= 0.
    const int n_std = n + n_le;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n_std);
    Eigen::VectorXd b(m);
    for (int r = 0; r < n_eq; ++r) {
        a.row(r).head(n) = lp.eq.row(r);
        b(r) = lp.eq_rhs(r);
    }
    for (int r = 0; r < n_le; ++r) {
        a.row(n_eq + r).head(n) = lp.le.row(r);
        a(n_eq + r, n + r) = 1.0;
        b(n_eq + r) = lp.le_rhs(r);
    }
    for (int r = 0; r < m; ++r) {
        // Scale on the structural part only; slacks keep a unit coefficient
        // (rescaling a slack is just a change of variable).
        const double scale = a.row(r).head(n).cwiseAbs().maxCoeff();
        if (scale > 0.0) {
            a.row(r).head(n) /= scale;
            b(r) /= scale;
        }
        if (b(r) < 0.0) {
            a.row(r) *= -1.0;
            b(r) *= -1.0;
        }
    }
    const Eigen::MatrixXd a_std = a;
    const Eigen::VectorXd b_std = b;

    // Phase 1 with one artificial per row.
    Eigen::MatrixXd a1(m, n_std + m);
    a1 << a, Eigen::MatrixXd::Identity(m, m);
    Tableau tab(a1, b);
    tab.basis().resize(m);
    for (int r = 0; r < m; ++r) tab.basis()[r] = n_std + r;

    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_std + m);
    phase1.tail(m).setOnes();
    std::vector<char> all(static_cast<std::size_t>(n_std + m), 1);
    tab.optimise(phase1, all);
    if (tab.value(phase1) > kFeasTol) {
        return {LpStatus::Infeasible, Eigen::VectorXd::Zero(n), 0.0};
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant.
    for (int r = tab.rows() - 1; r >= 0; --r) {
        if (tab.basis()[r] < n_std) continue;
        int enter = -1;
        for (int c = 0; c < n_std; ++c) {
            if (!tab.in_basis(c) && std::abs(tab.a()(r, c)) > kPivotTol) {
                enter = c;
                break;
            }
        }
        if (enter >= 0) {
            tab.pivot(r, enter);
        } else {
            tab.drop_row(r);
        }
    }

    // Phase 2 on the original columns.
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_std + m);
    cost.head(n) = lp.cost;
    const double cost_scale = lp.cost.size() ? lp.cost.cwiseAbs().maxCoeff() : 0.0;
    if (cost_scale > 0.0) cost /= cost_scale;
    std::vector<char> structural(static_cast<std::size_t>(n_std + m), 0);
    std::fill(structural.begin(), structural.begin() + n_std, 1);
    if (!tab.optimise(cost, structural)) {
        return {LpStatus::Unbounded, Eigen::VectorXd::Zero(n), 0.0};
    }

    // Re-solve the basic variables against the unpivoted system.
    const auto& basis = tab.basis();
    const int k = static_cast<int>(basis.size());
    Eigen::MatrixXd basic(m, k);
    for (int c = 0; c < k; ++c) basic.col(c) = a_std.col(basis[c]);
    const Eigen::VectorXd xb = basic.colPivHouseholderQr().solve(b_std);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_std);
    for (int c = 0; c < k; ++c) z(basis[c]) = std::max(xb(c), 0.0);

    LpSolution out;
    out.status = LpStatus::Optimal;
    out.x = z.head(n);
    out.objective = lp.cost.dot(out.x);
    return out;
}

}  // namespace qvlc
