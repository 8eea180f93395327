#include "xfer/metrics.hpp"

#include <cmath>

#include "xfer/error.hpp"

namespace xfer {

double tracking_error(const Signal& desired, const Signal& measured) {
    if (desired.rows() != measured.rows() || desired.cols() != measured.cols())
        throw DimensionError("tracking_error: signals differ in shape");
    if (desired.cols() == 0) return 0.0;
    return (desired - measured).colwise().norm().sum() / static_cast<double>(desired.cols());
}

double relative_l2(const Signal& a, const Signal& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("relative_l2: shape mismatch");
    const double denom = b.norm();
    if (denom == 0.0) throw InvalidArgument("relative_l2: reference signal is zero");
    return (a - b).norm() / denom;
}

double percent_reduction(double e_without, double e_with) {
    if (!(e_without > 0.0)) throw InvalidArgument("percent_reduction: baseline error must be > 0");
    return 100.0 * (e_without - e_with) / e_without;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

}  // namespace xfer
