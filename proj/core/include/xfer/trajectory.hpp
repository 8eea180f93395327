#pragma once

#include <string>
#include <vector>

#include "xfer/lti.hpp"

namespace xfer {

/// Desired 3-axis position, sampled at 0..N (N = duration / dt).
struct Trajectory {
    std::string name;
    double dt = 0.01;
    double duration = 6.0;
    Signal samples;  // 3 x (N+1), meters

    Eigen::Index steps() const { return samples.cols() - 1; }
    /// y*(1..N): what the measured output y(1..N) is compared against.
    Signal targets() const { return samples.rightCols(steps()); }
    /// y*(0..N-1): the nominal reference command.
    Signal nominal_input() const { return samples.leftCols(steps()); }
};

struct TrajectoryOptions {
    double scale = 1.0;  // multiplies every spatial dimension; 0 gives a point
};

const std::vector<std::string>& trajectory_names();

/// Smooth closed-form trajectory, at rest at both ends and starting at the
/// origin. Throws InvalidArgument for an unknown name (the message lists the
/// valid ones).
Trajectory trajectory_library(const std::string& name, double duration_s = 6.0, double dt = 0.01,
                              const TrajectoryOptions& options = {});

/// Normalized progress s(t) in [0, 1] with raised-cosine speed ramps of
/// length min(1, duration / 4) at both ends.
double trajectory_phase(double t, double duration);

}  // namespace xfer
