#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "xfer/error.hpp"
#include "xfer/ilc.hpp"
#include "xfer/l1_adaptive.hpp"
#include "xfer/plant.hpp"
#include "xfer/signal_io.hpp"
#include "xfer/transfer.hpp"

namespace xfer {

/// Where the reference-model state in the transfer regressor comes from.
///   tracking:    state of the reference model while it tracks the
///                trajectory exactly (perfect-tracking recursion)
///   rollout:     reference model driven by the learned input (fit only)
///   closed_loop: reference model driven by the map's own output (apply only)
enum class StateSource { tracking, rollout, closed_loop };

struct TransferSettings {
    TransferVariant variant = TransferVariant::state;
    FitStructure structure = FitStructure::decoupled;
    StateSource fit_state = StateSource::tracking;
    StateSource apply_state = StateSource::tracking;
    int n_bar = 0;  // 0: number of reference-model states
    double cutoff = 1e-10;
    double ridge = 0.0;
};

struct PlantSetup {
    PlantModel plant;
    L1Config l1;
};

struct ExperimentConfig {
    PlantSetup source;
    PlantSetup target;
    IlcConfig ilc;
    /// Symmetric bounds |u| <= u_max, |y| <= y_max on every lifted sample;
    /// infinite means unconstrained. Absolute signals unless told otherwise.
    double u_max = std::numeric_limits<double>::infinity();
    double y_max = std::numeric_limits<double>::infinity();
    bool absolute_constraints = true;
    std::vector<std::string> trajectories;
    double duration = 6.0;
    double dt = 0.01;
    int learn_iterations = 10;
    std::string transfer_source = "circle";
    std::string transfer_target = "lemniscate";
    int transfer_iterations = 10;
    int matrix_iterations = 1;
    /// false: the matrix runs without the warm start (control arm).
    bool matrix_transfer = true;
    int repetitions = 10;
    /// Target reference model for diff-ref: poles and gains per axis.
    VectorXd diff_ref_m;
    VectorXd diff_ref_kp;
    TransferSettings transfer;
    std::uint64_t seed = 1;
    int workers = 0;  // 0: hardware concurrency; never affects results

    static ExperimentConfig defaults();
    void validate() const;
};

/// Parse a JSON config; missing keys keep their defaults and per-axis
/// entries accept a scalar broadcast over the axes. Throws ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved single-line JSON, embedded in every report header.
std::string config_to_json(const ExperimentConfig& cfg);

/// splitmix64 over the base seed and a path of stream identifiers.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

/// The learned pair written by `learn` and consumed by the transfer commands.
struct LearnedPair {
    std::string trajectory;
    Signal y_desired;  // 3 x (N+1)
    Signal u;          // 3 x N, absolute reference command
};

std::filesystem::path learned_input_path(const std::filesystem::path& out, const std::string& trajectory);
std::filesystem::path learned_desired_path(const std::filesystem::path& out, const std::string& trajectory);
void save_learned(const std::filesystem::path& out, const LearnedPair& pair);
LearnedPair load_learned(const std::filesystem::path& out, const std::string& trajectory);

/// Raised when the command cannot start or a rollout, solver or transfer
/// application fails; carries the process exit code.
class ExperimentFailure : public Error {
public:
    ExperimentFailure(const std::string& what, int exit_code) : Error(what), code_(exit_code) {}
    int exit_code() const noexcept { return code_; }

private:
    int code_;
};

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFault = 3;

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

using Logger = std::function<void(const std::string&)>;

struct CommandResult {
    std::vector<std::filesystem::path> files;
    std::vector<Report> reports;  // same order as the CSV files among `files`
};

/// Iteration records and learned pairs for every configured trajectory.
CommandResult cmd_learn(const ExperimentConfig& cfg, const std::filesystem::path& out, const Logger& log = {});
/// One source -> target transfer followed by further learning, with and
/// without the transfer warm start.
CommandResult cmd_transfer(const ExperimentConfig& cfg, const std::filesystem::path& out, const Logger& log = {});
/// One-to-all matrix over the configured trajectories.
CommandResult cmd_matrix(const ExperimentConfig& cfg, const std::filesystem::path& out, const Logger& log = {});
/// Repeated transfer + learning runs with distinct seeds.
CommandResult cmd_repeat(const ExperimentConfig& cfg, const std::filesystem::path& out, const Logger& log = {});
/// Matrix with a different target reference model, mapped and naive.
CommandResult cmd_diff_ref(const ExperimentConfig& cfg, const std::filesystem::path& out, const Logger& log = {});
/// Relative degree, minimum phase and L1-norm condition diagnostics.
CommandResult cmd_relative_degree(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                  const Logger& log = {});

/// Runs f(0..count-1) on `workers` threads (0: hardware concurrency). The
/// exception of the lowest failing index is rethrown after all have joined.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& f);

}  // namespace xfer
