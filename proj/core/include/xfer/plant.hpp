#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xfer/continuous.hpp"
#include "xfer/lti.hpp"

namespace xfer {

/// Velocity dynamics of one axis:
///   dv/dt = (gain * u(t - delay dt) - v) / tau - drag * v + a(t, v)
/// where a collects the repetitive disturbance, the Lipschitz term and noise.
struct VehicleParams {
    double gain = 1.0;
    double tau = 0.25;   // s
    double drag = 0.35;  // 1/s
    int delay = 2;       // samples
};

struct DisturbanceParams {
    double amplitude = 0.1;       // peak of the repetitive profile, m/s^2
    double freq1 = 0.5;           // Hz
    double freq2 = 1.3;           // Hz
    double lipschitz = 0.2;       // L_f of the velocity-dependent term, 1/s
    double velocity_sat = 2.0;    // m/s, saturation of that term
    double noise_std = 0.02;      // m/s^2, white acceleration noise
    bool enabled = true;

    static DisturbanceParams none();
};

struct PlantModel {
    std::string name;
    VehicleParams vehicle;
    DisturbanceParams disturbance;
    double dt = 0.01;
    Eigen::Index axes = 3;
    /// Replace the vehicle and its controller by the reference model itself.
    bool ideal = false;

    static PlantModel source_like();
    static PlantModel target_like();
    void validate() const;

    /// Repetitive profile d(t) for every axis.
    VectorXd repetitive(double t) const;
    /// Saturated-linear term f(y1) = -L_f clamp(y1, +-v_sat); Lipschitz by construction.
    VectorXd lipschitz_term(const VectorXd& y1) const;
    /// Delay-free linear part per axis, for design checks.
    ContinuousModel velocity_model() const;
};

/**
 * @brief Per-axis plant state and exact-hold integrator.
 *
 * The linear lag and drag are advanced exactly with the acceleration input
 * held over the step; the disturbance terms are evaluated at the start of
 * the step.
 */
class PlantSimulator {
public:
    PlantSimulator(PlantModel model, std::uint64_t seed);

    const VectorXd& velocity() const noexcept { return v_; }
    const VectorXd& position() const noexcept { return pos_; }

    /// Apply command u at sample k; the command reaching the dynamics is the
    /// one issued `delay` samples earlier (zero before that).
    void step(std::size_t k, const VectorXd& u);

private:
    PlantModel model_;
    VectorXd v_, pos_;
    std::vector<VectorXd> pending_;  // ring buffer of delayed commands
    std::size_t head_ = 0;
    std::mt19937_64 rng_;
    std::normal_distribution<double> noise_{0.0, 1.0};
    double decay_, phi1_, phi2_;
};

}  // namespace xfer
