#include "xfer/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xfer/error.hpp"

namespace xfer {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

DisturbanceParams DisturbanceParams::none() {
    DisturbanceParams d;
    d.enabled = false;
    return d;
}

PlantModel PlantModel::source_like() {
    PlantModel m;
    m.name = "source";
    m.vehicle = {1.0, 0.25, 0.35, 2};
    return m;
}

PlantModel PlantModel::target_like() {
    PlantModel m;
    m.name = "target";
    m.vehicle = {1.3, 0.20, 0.20, 1};
    return m;
}

void PlantModel::validate() const {
    if (!(vehicle.tau > 0.0)) throw InvalidArgument("PlantModel: tau must be > 0");
    if (!(vehicle.gain > 0.0)) throw InvalidArgument("PlantModel: gain must be > 0");
    if (vehicle.drag < 0.0) throw InvalidArgument("PlantModel: drag must be >= 0");
    if (vehicle.delay < 0) throw InvalidArgument("PlantModel: delay must be >= 0");
    if (!(dt > 0.0)) throw InvalidArgument("PlantModel: dt must be > 0");
    if (axes < 1) throw InvalidArgument("PlantModel: axes must be >= 1");
    const auto& d = disturbance;
    if (d.amplitude < 0.0 || d.lipschitz < 0.0 || d.velocity_sat < 0.0 || d.noise_std < 0.0)
        throw InvalidArgument("PlantModel: disturbance parameters must be >= 0");
}

VectorXd PlantModel::repetitive(double t) const {
    VectorXd d = VectorXd::Zero(axes);
    if (!disturbance.enabled) return d;
    for (Eigen::Index i = 0; i < axes; ++i) {
        const double a = static_cast<double>(i);
        d(i) = disturbance.amplitude * (0.6 * std::sin(kTwoPi * disturbance.freq1 * t + 0.9 * a + 0.3) +
                                        0.4 * std::sin(kTwoPi * disturbance.freq2 * t + 1.7 * a + 1.1));
    }
    return d;
}

VectorXd PlantModel::lipschitz_term(const VectorXd& y1) const {
    if (!disturbance.enabled) return VectorXd::Zero(y1.size());
    const double s = disturbance.velocity_sat;
    return -disturbance.lipschitz * y1.cwiseMax(-s).cwiseMin(s);
}

ContinuousModel PlantModel::velocity_model() const {
    const double a = 1.0 / vehicle.tau + vehicle.drag;
    ContinuousModel m;
    m.A = -a * MatrixXd::Identity(axes, axes);
    m.B = vehicle.gain / vehicle.tau * MatrixXd::Identity(axes, axes);
    m.C = MatrixXd::Identity(axes, axes);
    m.D = MatrixXd::Zero(axes, axes);
    return m;
}

PlantSimulator::PlantSimulator(PlantModel model, std::uint64_t seed)
    : model_(std::move(model)), rng_(seed) {
    model_.validate();
    v_ = VectorXd::Zero(model_.axes);
    pos_ = VectorXd::Zero(model_.axes);
    pending_.assign(static_cast<std::size_t>(model_.vehicle.delay), VectorXd::Zero(model_.axes));
    const double a = 1.0 / model_.vehicle.tau + model_.vehicle.drag;
    decay_ = std::exp(-a * model_.dt);
    phi1_ = (1.0 - decay_) / a;
    phi2_ = (model_.dt - phi1_) / a;
}

void PlantSimulator::step(std::size_t k, const VectorXd& u) {
    if (u.size() != model_.axes) throw DimensionError("PlantSimulator: command has wrong length");
    VectorXd applied;
    if (pending_.empty()) {
        applied = u;
    } else {
        applied = pending_[head_];
        pending_[head_] = u;
        head_ = (head_ + 1) % pending_.size();
    }
    const double t = static_cast<double>(k) * model_.dt;
    VectorXd w = (model_.vehicle.gain / model_.vehicle.tau) * applied;
    if (model_.disturbance.enabled) {
        w += model_.repetitive(t) + model_.lipschitz_term(v_);
        if (model_.disturbance.noise_std > 0.0)
            for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += model_.disturbance.noise_std * noise_(rng_);
    }
    pos_ += phi1_ * v_ + phi2_ * w;
    v_ = decay_ * v_ + phi1_ * w;
}

}  // namespace xfer
