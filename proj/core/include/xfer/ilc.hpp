#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xfer/lti.hpp"
#include "xfer/qp.hpp"

namespace xfer {

/// Iteration-domain covariance. Stays a scaled identity as long as the
/// prior and both noise terms are isotropic, which keeps the filter O(N p)
/// per trial; falls back to a dense matrix otherwise.
class Covariance {
public:
    static Covariance isotropic(Eigen::Index size, double variance);
    static Covariance dense(MatrixXd P);

    Eigen::Index size() const noexcept { return size_; }
    bool is_isotropic() const noexcept { return dense_.size() == 0; }
    double variance() const noexcept { return variance_; }  // valid when isotropic
    MatrixXd to_dense() const;

    /// Random-walk prediction followed by a measurement update with
    /// q_meas * I noise. Returns the Kalman gain applied to an innovation.
    VectorXd update(const VectorXd& innovation, double q_proc, double q_meas);

private:
    Covariance() = default;
    Eigen::Index size_ = 0;
    double variance_ = 0.0;
    MatrixXd dense_;
};

struct KalmanConfig {
    double p0 = 1.0;
    double q_proc = 1e-4;
    double q_meas = 1e-2;
};

struct IlcConstraints {
    MatrixXd S_c;
    VectorXd y_max;
    MatrixXd Z_c;
    VectorXd u_max;
    /// Apply bounds to absolute signals (deviation plus reference offsets).
    bool absolute = true;

    bool empty() const { return S_c.rows() == 0 && Z_c.rows() == 0; }
};

/// Weights default to q_weight * I and r_weight * I when Q, R are left empty.
struct IlcConfig {
    double q_weight = 1.0;
    double r_weight = 1e-4;
    MatrixXd Q;
    MatrixXd R;
    std::optional<IlcConstraints> constraints;
    KalmanConfig kalman;
    QpOptions qp;

    void validate(Eigen::Index size) const;
};

struct IlcState {
    VectorXd d_hat;
    Covariance P = Covariance::isotropic(0, 0.0);
    int j = 0;
};

IlcState initial_ilc_state(Eigen::Index size, const KalmanConfig& kalman);

/// Reference offsets of the lifted deviation variables: y_abs = y_ref + y~,
/// u_abs = u_ref + u~. Only used for absolute-signal constraints.
struct IlcOffsets {
    VectorXd y_ref;
    VectorXd u_ref;
};

IlcState kalman_update(const IlcState& state, const IlcConfig& cfg, const LiftedModel& F,
                       const VectorXd& u_applied, const VectorXd& y_measured);

/**
 * @brief Input update for one lifted model and weight set.
 *
 * Minimizes (F u + d)' Q (F u + d) + u' R u subject to the configured
 * output and input constraints. The Hessian F'QF + R is formed and factored
 * once at construction; next_input() is then cheap and thread-safe.
 */
class IlcUpdater {
public:
    IlcUpdater(LiftedModel F, IlcConfig cfg);

    const LiftedModel& model() const noexcept { return F_; }
    const IlcConfig& config() const noexcept { return cfg_; }

    struct Step {
        VectorXd u;
        int active_constraints = 0;
    };

    Step next_input(const IlcState& state, const IlcOffsets* offsets = nullptr) const;

private:
    LiftedModel F_;
    IlcConfig cfg_;
    MatrixXd QF_;  // Q F
    DenseQpSolver solver_;
};

/// One-shot convenience wrapper around IlcUpdater.
VectorXd ilc_update(const IlcState& state, const IlcConfig& cfg, const LiftedModel& F,
                    const IlcOffsets* offsets = nullptr);

/// Seed the filter so that the predicted error under u_transfer is zero.
IlcState init_from_transfer(const VectorXd& u_transfer, const LiftedModel& F,
                            const KalmanConfig& kalman = {});

/// Mean Euclidean norm across channels of a lifted error vector.
double lifted_tracking_error(const VectorXd& error, int channels);

struct RolloutOutcome {
    VectorXd y;            // lifted output deviation y~ = y - y*
    double error = 0.0;    // tracking error of this trial
};

using RolloutFn = std::function<RolloutOutcome(int iteration, const VectorXd& u)>;

struct IlcIteration {
    int iteration = 0;  // 1-based
    VectorXd u;
    VectorXd y;
    double error = 0.0;
    double max_input = 0.0;
    int active_constraints = 0;
};

struct LearningRecord {
    std::vector<IlcIteration> iterations;
    IlcState final_state;
    std::optional<std::string> failure;

    bool ok() const { return !failure.has_value(); }
};

/// rollout -> kalman_update -> ilc_update, `iterations` times. The first
/// input comes from the warm-start state when given, otherwise from a zero
/// disturbance estimate. Faults stop the loop and keep the completed trials.
LearningRecord run_ilc(const RolloutFn& rollout, const IlcUpdater& updater, int iterations,
                       std::optional<IlcState> warm_start = std::nullopt,
                       const IlcOffsets* offsets = nullptr);

}  // namespace xfer
