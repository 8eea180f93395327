#pragma once

#include <vector>

#include "xfer/lti.hpp"

namespace xfer {

/// Mean over samples of the Euclidean position error, in meters.
/// Throws DimensionError when the signals differ in shape.
double tracking_error(const Signal& desired, const Signal& measured);

/// |a - b|_2 / |b|_2 over all channels and samples.
double relative_l2(const Signal& a, const Signal& b);

/// 100 (e_without - e_with) / e_without.
double percent_reduction(double e_without, double e_with);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace xfer
