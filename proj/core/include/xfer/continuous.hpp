#pragma once

#include <Eigen/Dense>

#include "xfer/lti.hpp"

namespace xfer {

/// Continuous-time realization dx/dt = A x + B u, y = C x + D u.
///
/// Used for the L1 design checks, which are stated on continuous transfer
/// functions, and as the source of the zero-order-hold discretizations.
struct ContinuousModel {
    MatrixXd A, B, C, D;

    Eigen::Index states() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index outputs() const { return C.rows(); }

    void validate() const;

    static ContinuousModel gain(const MatrixXd& D);
    static ContinuousModel identity(Eigen::Index p);
    static ContinuousModel integrator(Eigen::Index p);
    /// diag(a_i / (s + a_i)).
    static ContinuousModel first_order_lag(const VectorXd& poles);
};

/// y = second(first(u)).
ContinuousModel series(const ContinuousModel& first, const ContinuousModel& second);
ContinuousModel sum(const ContinuousModel& a, const ContinuousModel& b);
ContinuousModel difference(const ContinuousModel& a, const ContinuousModel& b);
/// Requires D invertible.
ContinuousModel inverse(const ContinuousModel& g);

struct DiscreteMatrices {
    MatrixXd A, B;
};

/// Exact zero-order-hold discretization of (A, B) via the augmented matrix exponential.
DiscreteMatrices zoh(const MatrixXd& A, const MatrixXd& B, double dt);

}  // namespace xfer
