#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace xfer {

struct QpOptions {
    /// 0 selects 10 * (n + m) + 100.
    int max_iterations = 0;
    /// A row is satisfied when A_i x - b_i <= tolerance * (1 + |b_i|).
    double tolerance = 1e-12;
};

struct QpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers;  // one per constraint row, zero when inactive
    std::vector<int> active_set;
    int iterations = 0;
    double objective = 0.0;
};

/**
 * @brief Dense strictly convex QP
 *
 *   minimize    1/2 x' H x + g' x
 *   subject to  A x <= b
 *
 * Dual active-set method of Goldfarb and Idnani: start from the unconstrained
 * minimizer and add the most violated constraint one at a time, dropping
 * constraints whose multipliers would turn negative. No feasible starting
 * point is needed and infeasibility is detected when a violated row is
 * linearly dependent on the active rows with no multiplier left to release.
 *
 * The Cholesky factor of H is computed once; one solver can be reused for
 * many (g, A, b) triples and shared between threads.
 */
class DenseQpSolver {
public:
    explicit DenseQpSolver(Eigen::MatrixXd H);

    Eigen::Index size() const noexcept;
    const Eigen::MatrixXd& hessian() const noexcept;

    Eigen::VectorXd solve_unconstrained(const Eigen::VectorXd& g) const;

    /// Throws InfeasibleProblem or SolverError (iteration cap).
    QpSolution solve(const Eigen::VectorXd& g, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const QpOptions& options = {}) const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

QpSolution solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                    const Eigen::VectorXd& b, const QpOptions& options = {});

}  // namespace xfer
