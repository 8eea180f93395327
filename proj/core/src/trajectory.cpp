#include "xfer/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xfer/error.hpp"

namespace xfer {

namespace {

constexpr double kPi = std::numbers::pi;

using Eigen::Vector3d;

// Position on the unit path for progress s in [0, 1]; every shape starts at 0.
Vector3d circle(double s) {
    const double th = 2.0 * kPi * s;
    return {0.8 * (std::cos(th) - 1.0), 0.8 * std::sin(th), 0.2 * std::sin(2.0 * th)};
}

Vector3d lemniscate(double s) {
    const double th = 2.0 * kPi * s;
    return {1.0 * std::sin(th), 0.5 * std::sin(2.0 * th), 0.2 * (1.0 - std::cos(th))};
}

Vector3d helix_up(double s) {
    const double th = 4.0 * kPi * s;
    return {0.5 * (std::cos(th) - 1.0), 0.5 * std::sin(th), 1.0 * s};
}

Vector3d ramp_diagonal(double s) { return {1.5 * s, 1.2 * s * s, 0.6 * s * s * s}; }

Vector3d sine_xy(double s) {
    const double th = 2.0 * kPi * s;
    return {1.6 * s, 0.5 * std::sin(2.0 * th), 0.2 * (1.0 - std::cos(th))};
}

Vector3d rounded_square(double s) {
    const double th = 2.0 * kPi * s;
    const double c = std::cos(th), sn = std::sin(th);
    const double r = std::pow(c * c * c * c + sn * sn * sn * sn, -0.25);
    return {0.8 * (r * c - 1.0), 0.8 * r * sn, 0.15 * std::sin(2.0 * th)};
}

using Shape = Vector3d (*)(double);

struct Entry {
    const char* name;
    Shape shape;
};

constexpr Entry kShapes[] = {
    {"circle", circle},           {"lemniscate", lemniscate}, {"helix-up", helix_up},
    {"ramp-diagonal", ramp_diagonal}, {"sine-xy", sine_xy},   {"rounded-square", rounded_square},
};

}  // namespace

const std::vector<std::string>& trajectory_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& e : kShapes) v.emplace_back(e.name);
        return v;
    }();
    return names;
}

double trajectory_phase(double t, double duration) {
    if (!(duration > 0.0)) throw InvalidArgument("trajectory_phase: duration must be > 0");
    const double tr = std::min(1.0, duration / 4.0);
    const double total = duration - tr;  // integral of the unit speed profile
    auto ramp = [tr](double tau) { return 0.5 * tau - tr / (2.0 * kPi) * std::sin(kPi * tau / tr); };
    if (t <= 0.0) return 0.0;
    if (t >= duration) return 1.0;
    double area;
    if (t < tr) area = ramp(t);
    else if (t <= duration - tr) area = 0.5 * tr + (t - tr);
    else area = total - ramp(duration - t);
    return area / total;
}

Trajectory trajectory_library(const std::string& name, double duration_s, double dt,
                              const TrajectoryOptions& options) {
    const auto it = std::find_if(std::begin(kShapes), std::end(kShapes),
                                 [&](const Entry& e) { return name == e.name; });
    if (it == std::end(kShapes)) {
        std::string msg = "unknown trajectory '" + name + "'; valid names:";
        for (const auto& n : trajectory_names()) msg += " " + n;
        throw InvalidArgument(msg);
    }
    if (!(duration_s > 0.0) || !(dt > 0.0)) throw InvalidArgument("trajectory_library: duration and dt must be > 0");
    if (!std::isfinite(options.scale)) throw InvalidArgument("trajectory_library: scale must be finite");
    const auto N = static_cast<Eigen::Index>(std::llround(duration_s / dt));
    if (N < 1 || std::abs(static_cast<double>(N) * dt - duration_s) > 1e-9 * duration_s)
        throw InvalidArgument("trajectory_library: duration must be a whole number of samples");

    Trajectory traj;
    traj.name = name;
    traj.dt = dt;
    traj.duration = duration_s;
    traj.samples.resize(3, N + 1);
    for (Eigen::Index k = 0; k <= N; ++k) {
        const double t = static_cast<double>(k) * dt;
        traj.samples.col(k) = options.scale * it->shape(trajectory_phase(t, duration_s));
    }
    return traj;
}

}  // namespace xfer
