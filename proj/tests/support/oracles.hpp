#pragma once

// Test-side generators and reference computations. Nothing here calls into
// the library's own solvers, so results can be used to check them.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "xfer/continuous.hpp"
#include "xfer/lti.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Rng = std::mt19937_64;

MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Random model with spectral radius in [0.5, 0.95].
xfer::StateSpaceModel random_stable(Rng& rng, int n, int p, double dt = 0.05);

/// Built in normal form (output chains of length r_i, stable zero dynamics)
/// and hidden behind a random coordinate change. Spectral radius < 1.
/// Requires sum(r) <= n.
xfer::StateSpaceModel random_minimum_phase(Rng& rng, int n, const std::vector<int>& r, double dt = 0.05);

/// Random r_i in {1, 2} with sum(r) <= n.
std::vector<int> random_degrees(Rng& rng, int n, int p);

/// Sum of `components` random sinusoids per channel, samples 0..samples-1.
Eigen::MatrixXd smooth_trajectory(Rng& rng, int p, int samples, double dt, int components = 3, double max_freq = 0.6);

/// min 1/2 x'Hx + g'x on lo <= x <= hi by accelerated projected gradient.
VectorXd box_qp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo, const VectorXd& hi,
                double tol = 1e-13, int max_iterations = 2'000'000);

/// Markov parameters C A^k B by repeated multiplication.
std::vector<MatrixXd> markov(const xfer::StateSpaceModel& m, int count);

/// Classic fixed-step RK4 for dx/dt = A x + B u(t), from x0 over [0, t_end].
VectorXd rk4(const MatrixXd& A, const MatrixXd& B, const std::function<VectorXd(double)>& u, const VectorXd& x0,
             double t_end, double h);

/// L1 norm (largest row sum of |h_ij| integrals) of a strictly proper
/// continuous system from its frequency response sampled on a uniform grid
/// and inverted with an FFT over a window of `window_s` seconds.
double l1_norm_frequency_sampling(const xfer::ContinuousModel& g, double window_s, int samples);

}  // namespace oracle
