#include "xfer/ilc.hpp"

#include <cmath>
#include <sstream>

#include "xfer/error.hpp"

namespace xfer {

Covariance Covariance::isotropic(Eigen::Index size, double variance) {
    Covariance c;
    c.size_ = size;
    c.variance_ = variance;
    return c;
}

Covariance Covariance::dense(MatrixXd P) {
    if (P.rows() != P.cols()) throw DimensionError("Covariance: matrix must be square");
    Covariance c;
    c.size_ = P.rows();
    c.dense_ = std::move(P);
    return c;
}

MatrixXd Covariance::to_dense() const {
    if (!is_isotropic()) return dense_;
    return MatrixXd::Identity(size_, size_) * variance_;
}

VectorXd Covariance::update(const VectorXd& innovation, double q_proc, double q_meas) {
    if (innovation.size() != size_) throw DimensionError("Covariance::update: size mismatch");
    if (is_isotropic()) {
        const double prior = variance_ + q_proc;
        const double gain = prior / (prior + q_meas);
        variance_ = (1.0 - gain) * prior;
        return gain * innovation;
    }
    dense_.diagonal().array() += q_proc;
    MatrixXd S = dense_;
    S.diagonal().array() += q_meas;
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw SolverError("Kalman update: innovation covariance not SPD");
    // K = P S^-1; S and P are symmetric so K' = S^-1 P.
    const MatrixXd K = llt.solve(dense_).transpose();
    const VectorXd correction = K * innovation;
    const MatrixXd I = MatrixXd::Identity(size_, size_);
    MatrixXd next = (I - K) * dense_;
    dense_ = 0.5 * (next + next.transpose());
    return correction;
}

namespace {

bool is_psd(const MatrixXd& M, double floor) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= floor;
}

}  // namespace

void IlcConfig::validate(Eigen::Index size) const {
    if (!(kalman.q_meas > 0.0)) throw InvalidArgument("IlcConfig: q_meas must be > 0");
    if (kalman.q_proc < 0.0) throw InvalidArgument("IlcConfig: q_proc must be >= 0");
    if (!(kalman.p0 > 0.0)) throw InvalidArgument("IlcConfig: P0 must be > 0");
    if (Q.size() == 0) {
        if (q_weight < 0.0) throw InvalidArgument("IlcConfig: Q must be positive semi-definite");
    } else {
        if (Q.rows() != size || Q.cols() != size) throw DimensionError("IlcConfig: Q has wrong size");
        if (!is_psd(Q, -1e-12)) throw InvalidArgument("IlcConfig: Q must be positive semi-definite");
    }
    if (R.size() == 0) {
        if (!(r_weight > 0.0)) throw InvalidArgument("IlcConfig: R must be positive definite");
    } else {
        if (R.rows() != size || R.cols() != size) throw DimensionError("IlcConfig: R has wrong size");
        if (!is_psd(R, 1e-300)) throw InvalidArgument("IlcConfig: R must be positive definite");
    }
    if (constraints) {
        const auto& c = *constraints;
        if (c.S_c.rows() > 0 && (c.S_c.cols() != size || c.y_max.size() != c.S_c.rows()))
            throw DimensionError("IlcConfig: S_c / y_max dimensions inconsistent");
        if (c.S_c.rows() == 0 && c.y_max.size() != 0)
            throw DimensionError("IlcConfig: y_max given without S_c");
        if (c.Z_c.rows() > 0 && (c.Z_c.cols() != size || c.u_max.size() != c.Z_c.rows()))
            throw DimensionError("IlcConfig: Z_c / u_max dimensions inconsistent");
        if (c.Z_c.rows() == 0 && c.u_max.size() != 0)
            throw DimensionError("IlcConfig: u_max given without Z_c");
    }
}

IlcState initial_ilc_state(Eigen::Index size, const KalmanConfig& kalman) {
    IlcState s;
    s.d_hat = VectorXd::Zero(size);
    s.P = Covariance::isotropic(size, kalman.p0);
    s.j = 0;
    return s;
}

IlcState kalman_update(const IlcState& state, const IlcConfig& cfg, const LiftedModel& F,
                       const VectorXd& u_applied, const VectorXd& y_measured) {
    const auto n = F.size();
    if (state.d_hat.size() != n || u_applied.size() != n || y_measured.size() != n ||
        state.P.size() != n)
        throw DimensionError("kalman_update: dimensions inconsistent with F");
    if (!(cfg.kalman.q_meas > 0.0)) throw InvalidArgument("kalman_update: q_meas must be > 0");
    IlcState next = state;
    const VectorXd innovation = y_measured - F.F * u_applied - state.d_hat;
    next.d_hat += next.P.update(innovation, cfg.kalman.q_proc, cfg.kalman.q_meas);
    next.j = state.j + 1;
    return next;
}

namespace {

MatrixXd build_hessian(const LiftedModel& F, const IlcConfig& cfg, MatrixXd& QF) {
    const auto n = F.size();
    cfg.validate(n);
    if (cfg.Q.size() == 0) {
        QF = cfg.q_weight * F.F;
    } else {
        QF = cfg.Q * F.F;
    }
    MatrixXd H(n, n);
    H.noalias() = F.F.transpose() * QF;
    if (cfg.R.size() == 0) {
        H.diagonal().array() += cfg.r_weight;
    } else {
        H += cfg.R;
    }
    H = (H + H.transpose()).eval();  // 2 (F'QF + R), symmetrized
    return H;
}

}  // namespace

IlcUpdater::IlcUpdater(LiftedModel F, IlcConfig cfg)
    : F_(std::move(F)), cfg_(std::move(cfg)), solver_(build_hessian(F_, cfg_, QF_)) {}

IlcUpdater::Step IlcUpdater::next_input(const IlcState& state, const IlcOffsets* offsets) const {
    const auto n = F_.size();
    if (state.d_hat.size() != n) throw DimensionError("ilc_update: d_hat has wrong length");
    const VectorXd g = 2.0 * QF_.transpose() * state.d_hat;

    Step step;
    if (!cfg_.constraints || cfg_.constraints->empty()) {
        step.u = solver_.solve_unconstrained(g);
        return step;
    }

    const auto& c = *cfg_.constraints;
    const bool shift = c.absolute && offsets != nullptr;
    if (shift && ((offsets->y_ref.size() != 0 && offsets->y_ref.size() != n) ||
                  (offsets->u_ref.size() != 0 && offsets->u_ref.size() != n)))
        throw DimensionError("ilc_update: offsets have wrong length");
    const auto my = c.S_c.rows();
    const auto mu = c.Z_c.rows();
    MatrixXd A(my + mu, n);
    VectorXd b(my + mu);
    if (my > 0) {
        A.topRows(my).noalias() = c.S_c * F_.F;
        VectorXd offset = state.d_hat;
        if (shift && offsets->y_ref.size() == n) offset += offsets->y_ref;
        b.head(my) = c.y_max - c.S_c * offset;
    }
    if (mu > 0) {
        A.bottomRows(mu) = c.Z_c;
        b.tail(mu) = c.u_max;
        if (shift && offsets->u_ref.size() == n) b.tail(mu) -= c.Z_c * offsets->u_ref;
    }
    auto sol = solver_.solve(g, A, b, cfg_.qp);
    step.u = std::move(sol.x);
    step.active_constraints = static_cast<int>(sol.active_set.size());
    return step;
}

VectorXd ilc_update(const IlcState& state, const IlcConfig& cfg, const LiftedModel& F,
                    const IlcOffsets* offsets) {
    return IlcUpdater(F, cfg).next_input(state, offsets).u;
}

IlcState init_from_transfer(const VectorXd& u_transfer, const LiftedModel& F,
                            const KalmanConfig& kalman) {
    if (u_transfer.size() != F.size()) throw DimensionError("init_from_transfer: length mismatch");
    IlcState s = initial_ilc_state(F.size(), kalman);
    s.d_hat = -(F.F * u_transfer);
    return s;
}

double lifted_tracking_error(const VectorXd& error, int channels) {
    if (channels <= 0 || error.size() % channels != 0)
        throw DimensionError("lifted_tracking_error: length not divisible by channels");
    const auto N = error.size() / channels;
    if (N == 0) return 0.0;
    const Eigen::Map<const MatrixXd> e(error.data(), channels, N);
    return e.colwise().norm().sum() / static_cast<double>(N);
}

LearningRecord run_ilc(const RolloutFn& rollout, const IlcUpdater& updater, int iterations,
                       std::optional<IlcState> warm_start, const IlcOffsets* offsets) {
    if (iterations < 0) throw InvalidArgument("run_ilc: iterations must be >= 0");
    const auto n = updater.model().size();
    LearningRecord record;
    record.final_state = warm_start ? std::move(*warm_start)
                                    : initial_ilc_state(n, updater.config().kalman);
    for (int it = 1; it <= iterations; ++it) {
        try {
            auto step = updater.next_input(record.final_state, offsets);
            auto outcome = rollout(it, step.u);
            if (outcome.y.size() != n) throw DimensionError("run_ilc: rollout returned wrong length");
            IlcIteration rec;
            rec.iteration = it;
            rec.error = outcome.error;
            rec.active_constraints = step.active_constraints;
            const bool absolute = offsets != nullptr && offsets->u_ref.size() == n;
            rec.max_input = absolute ? (step.u + offsets->u_ref).cwiseAbs().maxCoeff()
                                     : step.u.cwiseAbs().maxCoeff();
            record.final_state = kalman_update(record.final_state, updater.config(), updater.model(),
                                               step.u, outcome.y);
            rec.u = std::move(step.u);
            rec.y = std::move(outcome.y);
            record.iterations.push_back(std::move(rec));
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "iteration " << it << ": " << e.what();
            record.failure = msg.str();
            break;
        }
    }
    return record;
}

}  // namespace xfer
