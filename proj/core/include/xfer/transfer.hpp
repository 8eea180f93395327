#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xfer/lti.hpp"

namespace xfer {

struct PerfectTracking {
    Signal u;         // p x K, u(0..K-1)
    MatrixXd x;       // n x (K+1), x(0..K)
    Signal y;         // p x K, y(1..K)
    bool minimum_phase = true;  // false: internal states may grow without bound
};

/// Inversion law u(k) = A0^-1 (-[C_i A^r_i] x(k) + [y*_i(k + r_i)]).
/// `y_desired` holds samples y*(0..); K = cols - max r_i inputs are produced.
/// Output i then equals y*_i(k) for every k >= r_i.
PerfectTracking perfect_tracking_input(const StateSpaceModel& model, const VectorRelativeDegree& vrd,
                                       const Signal& y_desired, const VectorXd& x0);
PerfectTracking perfect_tracking_input(const StateSpaceModel& model, const VectorRelativeDegree& vrd,
                                       const Signal& y_desired);

/// Repeat the last column `extra` times.
Signal hold_extend(const Signal& s, Eigen::Index extra);

/// Row a = [x(a)', y*_1(a + r_1), ..., y*_p(a + r_p)] for a = 0..N_r, where
/// N = y_desired.cols() - 1 and N_r = N - max r_i.
MatrixXd build_window_state(const MatrixXd& x_traj, const Signal& y_desired,
                            const VectorRelativeDegree& vrd);

/// Row a = [u(a-Nb)'..u(a-1)', y(a-Nb)'..y(a-1)', y*_i(a + r_i)...] for
/// a = 0..N_r. Windows are ordered oldest first; samples before 0 are zero,
/// which matches a system at rest. `y` is indexed from sample 0 (y(0) = C x0).
MatrixXd build_window_io(const Signal& u, const Signal& y, const Signal& y_desired,
                         const VectorRelativeDegree& vrd, int n_bar);

enum class TransferVariant { state, io };

struct TransferDiagnostics {
    double residual_norm = 0.0;
    double condition_number = 0.0;
    int rank = 0;
    bool rank_deficient = false;
};

/// full: every channel regresses on the whole row. decoupled: channel i only
/// sees its own states, its own input/output history and y*_i.
enum class FitStructure { full, decoupled };

struct FitOptions {
    double cutoff = 1e-10;  // relative singular-value cutoff
    double ridge = 0.0;
    FitStructure structure = FitStructure::full;
    /// Channel owning each state (state variant, decoupled only).
    std::vector<int> state_channels;
};

/// Channel owning each state of a model whose channels do not interact,
/// found from the nonzero pattern of C A^k. Throws InvalidArgument when a
/// state is seen by several outputs or by none.
std::vector<int> state_channel_partition(const StateSpaceModel& model);

/**
 * @brief Learned map from regressor rows to inputs.
 *
 * theta has one column per channel; the state variant uses n + p rows, the
 * io variant 2 p n_bar + p. Row a of the regressor predicts u(a), for
 * a = 0..N_r.
 */
struct TransferMap {
    TransferVariant variant = TransferVariant::state;
    FitStructure structure = FitStructure::full;
    MatrixXd theta;
    VectorRelativeDegree vrd;
    int n_bar = 0;
    TransferDiagnostics diagnostics;

    Eigen::Index channels() const { return theta.cols(); }
    /// State dimension for the state variant, n_bar p for io.
    Eigen::Index history_width() const;
};

/// Least squares through a truncated SVD with optional ridge term. `targets`
/// has one column per right-hand side.
MatrixXd solve_least_squares(const MatrixXd& W, const MatrixXd& targets, const FitOptions& options,
                             TransferDiagnostics* diagnostics = nullptr);

/// u_learned is p x (>= rows of W); column a is matched with row a.
TransferMap fit_transfer_map(const MatrixXd& W, const Signal& u_learned, TransferVariant variant,
                             const VectorRelativeDegree& vrd, int n_bar = 0,
                             const FitOptions& options = {});

/// Source of closed-loop information while a map is being applied.
class TransferFeedback {
public:
    virtual ~TransferFeedback() = default;
    /// State at sample k, if available.
    virtual std::optional<VectorXd> state(std::size_t k) = 0;
    /// Output y(k), if available.
    virtual std::optional<VectorXd> output(std::size_t k) = 0;
    /// The input u(k) has been chosen.
    virtual void apply(std::size_t k, const VectorXd& u) = 0;
};

/// Runs a linear model alongside the application (x0 = 0 by default).
class ModelFeedback : public TransferFeedback {
public:
    explicit ModelFeedback(StateSpaceModel model);
    ModelFeedback(StateSpaceModel model, VectorXd x0);

    std::optional<VectorXd> state(std::size_t k) override;
    std::optional<VectorXd> output(std::size_t k) override;
    void apply(std::size_t k, const VectorXd& u) override;

    /// States x(0..k) visited so far.
    MatrixXd states() const;

private:
    StateSpaceModel model_;
    std::vector<VectorXd> x_;
};

/// Replays recorded signals: states x(0..), outputs y(0..). Either may be empty.
class RecordedFeedback : public TransferFeedback {
public:
    RecordedFeedback(MatrixXd states, Signal outputs);

    std::optional<VectorXd> state(std::size_t k) override;
    std::optional<VectorXd> output(std::size_t k) override;
    void apply(std::size_t, const VectorXd&) override {}

private:
    MatrixXd x_;
    Signal y_;
};

/// Emits u(0..samples-1). y_desired needs samples + max r_i - 1 + 1 columns.
/// Throws MissingFeedback with the step index when the source has no data.
Signal apply_transfer_map_online(const TransferMap& map, const Signal& y_desired,
                                 TransferFeedback& feedback, Eigen::Index samples);

/// Offline evaluation: rows of a prebuilt regressor times theta, p x rows.
Signal predict_inputs(const TransferMap& map, const MatrixXd& W);

struct StateReconstructor {
    MatrixXd M_u;  // n x (n_bar p)
    MatrixXd M_y;  // n x (n_bar p)
    int n_bar = 0;

    /// x(k) from the oldest-first windows of u and y ending at k - 1.
    VectorXd reconstruct(const VectorXd& u_window, const VectorXd& y_window) const;
};

/// M_y = A^Nb V^+, M_u = U - M_y T with V = [C; CA; ...; C A^(Nb-1)].
/// Throws UnobservableError if rank V < n.
StateReconstructor state_reconstructor(const StateSpaceModel& model, int n_bar);

/// Input for the target reference model that reproduces the output the
/// source reference model gives under u_learned. Same length as u_learned.
Signal map_between_reference_models(const Signal& u_learned, const StateSpaceModel& ref_source,
                                    const StateSpaceModel& ref_target);

std::string transfer_map_to_json(const TransferMap& map);
TransferMap transfer_map_from_json(const std::string& text);

}  // namespace xfer
