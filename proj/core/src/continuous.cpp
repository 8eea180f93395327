#include "xfer/continuous.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "xfer/error.hpp"

namespace xfer {

void ContinuousModel::validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() || D.cols() != B.cols())
        throw DimensionError("ContinuousModel: inconsistent realization");
}

ContinuousModel ContinuousModel::gain(const MatrixXd& D) {
    return {MatrixXd(0, 0), MatrixXd(0, D.cols()), MatrixXd(D.rows(), 0), D};
}

ContinuousModel ContinuousModel::identity(Eigen::Index p) { return gain(MatrixXd::Identity(p, p)); }

ContinuousModel ContinuousModel::integrator(Eigen::Index p) {
    return {MatrixXd::Zero(p, p), MatrixXd::Identity(p, p), MatrixXd::Identity(p, p), MatrixXd::Zero(p, p)};
}

ContinuousModel ContinuousModel::first_order_lag(const VectorXd& poles) {
    const auto p = poles.size();
    return {MatrixXd((-poles).asDiagonal()), MatrixXd::Identity(p, p), MatrixXd(poles.asDiagonal()),
            MatrixXd::Zero(p, p)};
}

ContinuousModel series(const ContinuousModel& g1, const ContinuousModel& g2) {
    g1.validate();
    g2.validate();
    if (g1.outputs() != g2.inputs()) throw DimensionError("series: size mismatch");
    const auto n1 = g1.states();
    const auto n2 = g2.states();
    ContinuousModel out;
    out.A = MatrixXd::Zero(n1 + n2, n1 + n2);
    out.A.topLeftCorner(n1, n1) = g1.A;
    out.A.bottomLeftCorner(n2, n1) = g2.B * g1.C;
    out.A.bottomRightCorner(n2, n2) = g2.A;
    out.B.resize(n1 + n2, g1.inputs());
    out.B.topRows(n1) = g1.B;
    out.B.bottomRows(n2) = g2.B * g1.D;
    out.C.resize(g2.outputs(), n1 + n2);
    out.C.leftCols(n1) = g2.D * g1.C;
    out.C.rightCols(n2) = g2.C;
    out.D = g2.D * g1.D;
    return out;
}

namespace {

ContinuousModel combine(const ContinuousModel& a, const ContinuousModel& b, double sign) {
    a.validate();
    b.validate();
    if (a.inputs() != b.inputs() || a.outputs() != b.outputs())
        throw DimensionError("sum: size mismatch");
    const auto na = a.states();
    const auto nb = b.states();
    ContinuousModel out;
    out.A = MatrixXd::Zero(na + nb, na + nb);
    out.A.topLeftCorner(na, na) = a.A;
    out.A.bottomRightCorner(nb, nb) = b.A;
    out.B.resize(na + nb, a.inputs());
    out.B.topRows(na) = a.B;
    out.B.bottomRows(nb) = b.B;
    out.C.resize(a.outputs(), na + nb);
    out.C.leftCols(na) = a.C;
    out.C.rightCols(nb) = sign * b.C;
    out.D = a.D + sign * b.D;
    return out;
}

}  // namespace

ContinuousModel sum(const ContinuousModel& a, const ContinuousModel& b) { return combine(a, b, 1.0); }

ContinuousModel difference(const ContinuousModel& a, const ContinuousModel& b) {
    return combine(a, b, -1.0);
}

ContinuousModel inverse(const ContinuousModel& g) {
    g.validate();
    if (g.D.rows() != g.D.cols()) throw DimensionError("inverse: system must be square");
    Eigen::FullPivLU<MatrixXd> lu(g.D);
    if (!lu.isInvertible()) throw InvalidArgument("inverse: feedthrough matrix is singular");
    const MatrixXd Dinv = lu.inverse();
    return {g.A - g.B * Dinv * g.C, g.B * Dinv, -Dinv * g.C, Dinv};
}

DiscreteMatrices zoh(const MatrixXd& A, const MatrixXd& B, double dt) {
    const auto n = A.rows();
    const auto m = B.cols();
    if (A.cols() != n || B.rows() != n) throw DimensionError("zoh: inconsistent A, B");
    MatrixXd aug = MatrixXd::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = A * dt;
    aug.topRightCorner(n, m) = B * dt;
    const MatrixXd e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

}  // namespace xfer
