#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace xfer {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Multi-channel sampled signal: one row per channel, one column per sample.
/// Column-major storage means `Eigen::Map<const VectorXd>(s.data(), s.size())`
/// is exactly the lifted (sample-stacked) vector.
using Signal = Eigen::MatrixXd;

/// Stack the columns of a signal into a lifted vector.
VectorXd lift(const Signal& s);
/// Inverse of lift() for a known channel count.
Signal unlift(const VectorXd& v, Eigen::Index channels);

/**
 * @brief Discrete-time, square MIMO LTI realization
 *
 *   x(k+1) = A x(k) + B u(k)
 *   y(k)   = C x(k)
 *
 * The constructor enforces the structural invariants: A is n x n, B is n x p
 * with full column rank, C is p x n with full row rank, n >= p and dt > 0.
 */
class StateSpaceModel {
public:
    StateSpaceModel(MatrixXd A, MatrixXd B, MatrixXd C, double dt,
                    std::vector<std::string> input_labels = {},
                    std::vector<std::string> output_labels = {});

    const MatrixXd& A() const noexcept { return A_; }
    const MatrixXd& B() const noexcept { return B_; }
    const MatrixXd& C() const noexcept { return C_; }
    double dt() const noexcept { return dt_; }
    Eigen::Index states() const noexcept { return A_.rows(); }
    Eigen::Index channels() const noexcept { return B_.cols(); }
    const std::vector<std::string>& input_labels() const noexcept { return input_labels_; }
    const std::vector<std::string>& output_labels() const noexcept { return output_labels_; }

    /// Coordinate change x' = T x, i.e. (T A T^-1, T B, C T^-1).
    StateSpaceModel transformed(const MatrixXd& T) const;

private:
    MatrixXd A_, B_, C_;
    double dt_;
    std::vector<std::string> input_labels_, output_labels_;
};

struct SimulationResult {
    Signal y;    // p x N, y(1..N)
    MatrixXd x;  // n x (N+1), x(0..N)
};

/// Roll the recursion forward over every column of `u`.
SimulationResult simulate(const StateSpaceModel& model, const Signal& u, const VectorXd& x0);
SimulationResult simulate(const StateSpaceModel& model, const Signal& u);

struct VectorRelativeDegree {
    std::vector<int> r;
    MatrixXd A0;  // decoupling matrix, [A0]_ij = C_i A^(r_i - 1) B_j

    int total() const;
    int max() const;
};

constexpr double kMarkovTolerance = 1e-9;

/// Markov parameter C_i A^k B_j is treated as zero when the whole row
/// C_i A^k B is below tol * |C| * |A|^k * |B|.
/// Throws UndefinedRelativeDegree if some output never responds or A0 is singular.
VectorRelativeDegree vector_relative_degree(const StateSpaceModel& model,
                                            double tol = kMarkovTolerance);

/// One step experiment: a step of `magnitude` on `input_channel` applied at
/// sample 0 from rest; `y` holds the p-channel response y(0..K).
struct StepExperimentRecord {
    int input_channel = 0;
    double magnitude = 1.0;
    double dt = 0.0;
    Signal y;
};

struct StepRelativeDegreeEstimate {
    VectorRelativeDegree vrd;  // A0 = Y_r scaled by 1/magnitude per column
    MatrixXd Y_r;              // [Y_r]_ij = y_i(r_i) in experiment j
    bool full_rank = false;
};

/// Run the p unit-step experiments on a model (helper for generating records).
std::vector<StepExperimentRecord> step_experiments(const StateSpaceModel& model, int samples,
                                                   double magnitude = 1.0);

StepRelativeDegreeEstimate estimate_relative_degree_from_steps(
    const std::vector<StepExperimentRecord>& records, double tol = kMarkovTolerance);

/// Block lower-triangular map from u(0..N-1) to y(1..N) with zero initial state.
struct LiftedModel {
    MatrixXd F;
    int N = 0;
    int p = 0;
    double dt = 0.0;

    VectorXd apply(const VectorXd& u) const;
    Eigen::Index size() const { return F.rows(); }
};

LiftedModel lifted_representation(const StateSpaceModel& model, int N);

struct MinimumPhaseReport {
    bool minimum_phase = false;
    MatrixXd closed_loop;                              // A - B A0^-1 [C_i A^(r_i)]
    std::vector<std::complex<double>> spectrum;        // all eigenvalues, ascending modulus
    std::vector<std::complex<double>> zero_dynamics;   // spectrum without the r structural zeros
};

constexpr double kStabilityMargin = 1e-6;

MinimumPhaseReport minimum_phase_check(const StateSpaceModel& model,
                                       const VectorRelativeDegree& vrd,
                                       double tol = kStabilityMargin);

/// Stack of C_i A^(r_i), one row per output.
MatrixXd relative_degree_rows(const StateSpaceModel& model, const VectorRelativeDegree& vrd);

/// Zero-order-hold realization of diag(K_i m_i / (s^2 + m_i s + K_i m_i)).
/// States are ordered (position, velocity) per axis.
StateSpaceModel discretize_reference(const VectorXd& K, const VectorXd& m, double dt);

/// Largest eigenvalue modulus.
double spectral_radius(const MatrixXd& A);

}  // namespace xfer
