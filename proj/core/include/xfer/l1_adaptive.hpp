#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "xfer/continuous.hpp"
#include "xfer/lti.hpp"

namespace xfer {

/// Gains of the extended L1 output-feedback controller. Per-axis vectors
/// hold one entry per channel.
struct L1Config {
    VectorXd m;      // reference poles of M_i(s) = m_i / (s + m_i), rad/s
    VectorXd omega;  // low-pass cutoffs of V_i(s) = w_i / (s + w_i), rad/s
    VectorXd kp;     // outer proportional gains K_i
    double gamma = 1000.0;     // adaptation rate
    double sigma_max = 10.0;   // projection norm bound
    double eps_proj = 0.1;     // projection tolerance
    double lipschitz = 1.0;    // assumed Lipschitz constant of the disturbance
    double dt_ctrl = 0.01;     // controller sample time, s

    static L1Config defaults(Eigen::Index axes = 3);
    Eigen::Index axes() const { return m.size(); }
    void validate() const;
};

/// f(lambda) = ((eps + 1) |lambda|^2 - lambda_max^2) / (eps lambda_max^2).
double projection_bound(const VectorXd& lambda, double lambda_max, double eps);

/// Projection operator: passes y through unless lambda is in the boundary
/// layer (f >= 0) and y points outward, in which case the outward component
/// is scaled by (1 - f).
VectorXd projection(const VectorXd& lambda, const VectorXd& y, double lambda_max, double eps);

struct L1State {
    VectorXd yhat1;      // predictor output
    VectorXd sigma_hat;  // adaptive estimate, starts at zero
    VectorXd v_state;    // low-pass filter state
    VectorXd u_l1;       // last command

    static L1State zero(Eigen::Index axes);
};

struct L1StepResult {
    VectorXd u_l1;
    L1State state;
};

/**
 * @brief One controller sample.
 *
 * Sub-step order: read measurements, update the adaptive estimate with a
 * forward-Euler step of the projected law (each axis projected on its own,
 * then clamped to the f <= 1 set), compute u1 = K (u2 - y2) and the
 * filtered command V(u1 - sigma_hat), then advance the predictor M driven
 * by u_l1 + sigma_hat. M and V use exact pole-matched first-order
 * discretizations.
 *
 * Throws ControllerFault on a non-finite measurement.
 */
L1StepResult l1_step(const L1State& state, const L1Config& cfg, const VectorXd& u2,
                     const VectorXd& y1, const VectorXd& y2);

struct L1NormReport {
    double norm = 0.0;   // || F H (1 - V) ||_L1, largest over axes
    double bound = 0.0;  // norm * L
    bool satisfied = false;
    bool stable = false;
    double tail = 0.0;   // certified bound on the impulse-response tail past the horizon
    std::vector<std::complex<double>> spectrum;  // poles of the composed system
};

/// Compose H(s) = A (I - V + V M^-1 A)^-1, F(s) = (s I + H V K)^-1 and
/// G = F H (I - V) from a continuous estimate of the velocity dynamics A(s),
/// then sum the absolute impulse response of G over horizon_s.
L1NormReport verify_l1_norm_condition(const ContinuousModel& plant_estimate, const L1Config& cfg,
                                      double horizon_s);

/// The composed continuous system G(s) used by verify_l1_norm_condition.
ContinuousModel l1_condition_system(const ContinuousModel& plant_estimate, const L1Config& cfg);

}  // namespace xfer
