#include "xfer/qp.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "xfer/error.hpp"

namespace xfer {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DenseQpSolver::Impl {
    MatrixXd H;
    Eigen::LLT<MatrixXd> llt;
    // J0 = L^-T, needed only once constraints appear.
    mutable std::once_flag j0_once;
    mutable MatrixXd J0;

    const MatrixXd& initial_basis() const {
        std::call_once(j0_once, [this] {
            const auto n = H.rows();
            J0 = llt.matrixU().solve(MatrixXd::Identity(n, n));
        });
        return J0;
    }
};

DenseQpSolver::DenseQpSolver(MatrixXd H) : impl_(std::make_shared<Impl>()) {
    if (H.rows() != H.cols() || H.rows() == 0) throw DimensionError("DenseQpSolver: H must be square");
    if (!H.allFinite()) throw InvalidArgument("DenseQpSolver: H has non-finite entries");
    impl_->H = std::move(H);
    impl_->llt.compute(impl_->H);
    if (impl_->llt.info() != Eigen::Success)
        throw InvalidArgument("DenseQpSolver: H is not positive definite");
}

Eigen::Index DenseQpSolver::size() const noexcept { return impl_->H.rows(); }

const MatrixXd& DenseQpSolver::hessian() const noexcept { return impl_->H; }

VectorXd DenseQpSolver::solve_unconstrained(const VectorXd& g) const {
    if (g.size() != size()) throw DimensionError("DenseQpSolver: g has wrong length");
    return -impl_->llt.solve(g);
}

namespace {

// Working factorization: J J' = H^-1 and J(:, 0:q)' N = R(0:q, 0:q) for the
// active normals N (columns).
class ActiveSetFactor {
public:
    ActiveSetFactor(const MatrixXd& J0) : J_(J0), R_(MatrixXd::Zero(J0.rows(), J0.rows())) {}

    Eigen::Index active() const { return q_; }
    const MatrixXd& J() const { return J_; }

    VectorXd project(const VectorXd& normal) const { return J_.transpose() * normal; }

    VectorXd primal_direction(const VectorXd& d) const {
        const auto n = J_.rows();
        return J_.rightCols(n - q_) * d.tail(n - q_);
    }

    VectorXd dual_direction(const VectorXd& d) const {
        if (q_ == 0) return VectorXd();
        return R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
    }

    // Rotate d(q+1:) into d(q) and append it as column q of R.
    void add(VectorXd d) {
        const auto n = J_.rows();
        for (Eigen::Index j = n - 1; j > q_; --j) {
            const double a = d(j - 1);
            const double b = d(j);
            if (b == 0.0) continue;
            const double h = std::hypot(a, b);
            const double c = a / h;
            const double s = b / h;
            d(j - 1) = h;
            d(j) = 0.0;
            rotate_columns(j - 1, c, s);
        }
        R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
        ++q_;
    }

    void remove(Eigen::Index l) {
        for (Eigen::Index k = l; k + 1 < q_; ++k) R_.col(k).head(k + 2) = R_.col(k + 1).head(k + 2);
        R_.col(q_ - 1).setZero();
        // R is now upper Hessenberg in columns l..q-2.
        for (Eigen::Index j = l; j + 1 < q_; ++j) {
            const double a = R_(j, j);
            const double b = R_(j + 1, j);
            if (b == 0.0) continue;
            const double h = std::hypot(a, b);
            const double c = a / h;
            const double s = b / h;
            for (Eigen::Index k = j; k + 1 < q_; ++k) {
                const double r1 = R_(j, k);
                const double r2 = R_(j + 1, k);
                R_(j, k) = c * r1 + s * r2;
                R_(j + 1, k) = -s * r1 + c * r2;
            }
            R_(j + 1, j) = 0.0;
            rotate_columns(j, c, s);
        }
        --q_;
    }

private:
    void rotate_columns(Eigen::Index j, double c, double s) {
        for (Eigen::Index k = 0; k < J_.rows(); ++k) {
            const double t1 = J_(k, j);
            const double t2 = J_(k, j + 1);
            J_(k, j) = c * t1 + s * t2;
            J_(k, j + 1) = -s * t1 + c * t2;
        }
    }

    MatrixXd J_;
    MatrixXd R_;
    Eigen::Index q_ = 0;
};

}  // namespace

QpSolution DenseQpSolver::solve(const VectorXd& g, const MatrixXd& A, const VectorXd& b,
                                const QpOptions& options) const {
    const auto n = size();
    const auto m = A.rows();
    if (g.size() != n) throw DimensionError("DenseQpSolver::solve: g has wrong length");
    if (m > 0 && A.cols() != n) throw DimensionError("DenseQpSolver::solve: A has wrong column count");
    if (b.size() != m) throw DimensionError("DenseQpSolver::solve: b must have one entry per row of A");
    if (!g.allFinite() || !A.allFinite() || !b.allFinite())
        throw InvalidArgument("DenseQpSolver::solve: non-finite problem data");

    QpSolution sol;
    sol.x = solve_unconstrained(g);
    sol.multipliers = VectorXd::Zero(m);
    if (m == 0) {
        sol.objective = 0.5 * sol.x.dot(impl_->H * sol.x) + g.dot(sol.x);
        return sol;
    }

    const int cap = options.max_iterations > 0 ? options.max_iterations
                                               : static_cast<int>(10 * (n + m) + 100);
    ActiveSetFactor factor(impl_->initial_basis());
    std::vector<int> active;
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);
    VectorXd u(n + 1);  // multipliers of the active rows, then the candidate
    int iterations = 0;

    auto tick = [&] {
        if (++iterations > cap) {
            std::ostringstream msg;
            msg << "QP solver did not converge within " << cap << " iterations";
            throw SolverError(msg.str());
        }
    };

    for (;;) {
        tick();
        // Most violated inactive row.
        const VectorXd slack = b - A * sol.x;
        Eigen::Index p = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (is_active[static_cast<std::size_t>(i)]) continue;
            const double lim = options.tolerance * (1.0 + std::abs(b(i)));
            if (slack(i) < -lim && slack(i) < worst) {
                worst = slack(i);
                p = i;
            }
        }
        if (p < 0) break;

        const VectorXd normal = -A.row(p).transpose();
        double s_p = slack(p);
        auto q = factor.active();
        u(q) = 0.0;

        for (;;) {
            tick();
            q = factor.active();
            const VectorXd d = factor.project(normal);
            const VectorXd z = factor.primal_direction(d);
            const VectorXd r = factor.dual_direction(d);

            // Largest dual step that keeps the active multipliers nonnegative.
            double t1 = std::numeric_limits<double>::infinity();
            Eigen::Index drop = -1;
            for (Eigen::Index k = 0; k < q; ++k) {
                if (r(k) > 0.0) {
                    const double ratio = u(k) / r(k);
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = k;
                    }
                }
            }
            const double curvature = d.tail(n - q).squaredNorm();
            const bool primal_blocked = curvature <= 1e-12 * d.squaredNorm();
            const double t2 = primal_blocked ? std::numeric_limits<double>::infinity()
                                             : -s_p / curvature;
            const double t = std::min(t1, t2);

            if (!std::isfinite(t)) {
                std::ostringstream msg;
                msg << "QP infeasible: constraint row " << p
                    << " cannot be satisfied together with the active rows";
                throw InfeasibleProblem(msg.str(), static_cast<int>(p), active);
            }

            if (primal_blocked) {
                u.head(q) -= t * r;
                u(q) += t;
                is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
                active.erase(active.begin() + drop);
                for (Eigen::Index k = drop; k < q; ++k) u(k) = u(k + 1);
                factor.remove(drop);
                continue;
            }

            sol.x += t * z;
            u.head(q) -= t * r;
            u(q) += t;

            if (t == t2) {
                factor.add(d);
                active.push_back(static_cast<int>(p));
                is_active[static_cast<std::size_t>(p)] = 1;
                break;
            }

            is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
            active.erase(active.begin() + drop);
            for (Eigen::Index k = drop; k < q; ++k) u(k) = u(k + 1);
            factor.remove(drop);
            s_p = b(p) - A.row(p).dot(sol.x);
        }
    }

    for (std::size_t k = 0; k < active.size(); ++k)
        sol.multipliers(active[k]) = u(static_cast<Eigen::Index>(k));
    sol.active_set = std::move(active);
    sol.iterations = iterations;
    sol.objective = 0.5 * sol.x.dot(impl_->H * sol.x) + g.dot(sol.x);
    return sol;
}

QpSolution solve_qp(const MatrixXd& H, const VectorXd& g, const MatrixXd& A, const VectorXd& b,
                    const QpOptions& options) {
    return DenseQpSolver(H).solve(g, A, b, options);
}

}  // namespace xfer
