#include "xfer/rollout.hpp"

#include <cmath>
#include <string>

#include "xfer/error.hpp"
#include "xfer/metrics.hpp"

namespace xfer {

namespace {

bool same_dt(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

}  // namespace

RolloutResult rollout(const PlantModel& plant, const L1Config& l1, const StateSpaceModel& reference,
                      const Signal& u2, const Signal& y_desired, std::uint64_t seed) {
    plant.validate();
    l1.validate();
    const auto p = plant.axes;
    const auto N = u2.cols();
    if (l1.axes() != p || reference.channels() != p || u2.rows() != p || y_desired.rows() != p)
        throw DimensionError("rollout: channel counts of plant, controller, reference and signals differ");
    if (y_desired.cols() < N + 1) throw DimensionError("rollout: y_desired needs N + 1 samples");
    if (!same_dt(plant.dt, l1.dt_ctrl) || !same_dt(plant.dt, reference.dt()))
        throw InvalidArgument("rollout: plant, controller and reference sample times differ");
    if (!u2.allFinite()) throw InvalidArgument("rollout: non-finite reference command");

    RolloutResult out;
    out.u2 = u2;
    const auto ref = simulate(reference, u2);
    out.x_ref = ref.x;

    if (plant.ideal) {
        out.y2 = ref.y;
        out.y1 = Signal::Zero(p, N);
        if (reference.states() == 2 * p)
            for (Eigen::Index i = 0; i < p; ++i) out.y1.row(i) = ref.x.row(2 * i + 1).tail(N);
        out.u_l1 = Signal::Zero(p, N);
    } else {
        out.y2.resize(p, N);
        out.y1.resize(p, N);
        out.u_l1.resize(p, N);
        PlantSimulator sim(plant, seed);
        L1State state = L1State::zero(p);
        for (Eigen::Index k = 0; k < N; ++k) {
            auto step = l1_step(state, l1, u2.col(k), sim.velocity(), sim.position());
            state = std::move(step.state);
            out.u_l1.col(k) = step.u_l1;
            sim.step(static_cast<std::size_t>(k), step.u_l1);
            if (!sim.position().allFinite() || !sim.velocity().allFinite())
                throw RolloutDiverged("rollout diverged at step " + std::to_string(k + 1),
                                      static_cast<std::size_t>(k + 1));
            out.y2.col(k) = sim.position();
            out.y1.col(k) = sim.velocity();
        }
    }
    out.error = tracking_error(y_desired.middleCols(1, N), out.y2);
    return out;
}

}  // namespace xfer
