#pragma once

#include <cstdint>

#include "xfer/l1_adaptive.hpp"
#include "xfer/lti.hpp"
#include "xfer/plant.hpp"

namespace xfer {

struct RolloutResult {
    Signal y2;         // position, samples 1..N
    Signal y1;         // velocity, samples 1..N
    Signal u2;         // reference command actually applied, samples 0..N-1
    Signal u_l1;       // L1 output, samples 0..N-1
    MatrixXd x_ref;    // reference-model state driven by u2, samples 0..N
    double error = 0.0;  // tracking error of y2 against y_desired(1..N)
};

/**
 * @brief One closed-loop trajectory execution.
 *
 * At every sample: measure (y1, y2), run the L1 controller on u2(k), hand the
 * command to the plant (which applies its input delay) and advance the
 * plant one step. `reference` is the linear model the loop is meant to
 * follow; its state under u2 is returned for transfer fitting. For an ideal
 * plant the reference model itself produces the outputs.
 *
 * y_desired needs N + 1 samples. Throws RolloutDiverged on a non-finite
 * state and ControllerFault from the controller.
 */
RolloutResult rollout(const PlantModel& plant, const L1Config& l1, const StateSpaceModel& reference,
                      const Signal& u2, const Signal& y_desired, std::uint64_t seed);

}  // namespace xfer
