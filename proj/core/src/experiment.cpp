#include "xfer/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "xfer/continuous.hpp"
#include "xfer/error.hpp"
#include "xfer/metrics.hpp"
#include "xfer/rollout.hpp"
#include "xfer/trajectory.hpp"

namespace xfer {

namespace fs = std::filesystem;
using detail::json;

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.source = {PlantModel::source_like(), L1Config::defaults(3)};
    cfg.target = {PlantModel::target_like(), L1Config::defaults(3)};
    cfg.trajectories = trajectory_names();
    cfg.diff_ref_m = VectorXd::Constant(3, 8.0);
    cfg.diff_ref_kp = VectorXd::Constant(3, 2.0);
    return cfg;
}

namespace {

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

void check_setup(const PlantSetup& s, double dt, const std::string& where) {
    try {
        s.plant.validate();
        s.l1.validate();
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
    if (s.plant.axes != 3 || s.l1.axes() != 3) throw ConfigError(where + ": experiments use three axes");
    if (!same_time(s.plant.dt, dt) || !same_time(s.l1.dt_ctrl, dt))
        throw ConfigError(where + ": plant and controller sample times must equal dt");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!(dt > 0.0) || !(duration > 0.0)) throw ConfigError("dt and duration must be > 0");
    const double steps = duration / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps || std::round(steps) < 2)
        throw ConfigError("duration must be a whole number (>= 2) of samples");
    check_setup(source, dt, "source");
    check_setup(target, dt, "target");
    if (trajectories.empty()) throw ConfigError("trajectories: at least one name is required");
    const auto& valid = trajectory_names();
    std::set<std::string> seen;
    auto known = [&](const std::string& n) { return std::find(valid.begin(), valid.end(), n) != valid.end(); };
    for (const auto& n : trajectories) {
        if (!known(n)) throw ConfigError("trajectories: unknown name '" + n + "'");
        if (!seen.insert(n).second) throw ConfigError("trajectories: '" + n + "' listed twice");
    }
    if (!known(transfer_source) || !known(transfer_target))
        throw ConfigError("transfer: source and target must be library trajectories");
    if (learn_iterations < 1) throw ConfigError("learn.iterations must be >= 1");
    if (transfer_iterations < 0) throw ConfigError("transfer.iterations must be >= 0");
    if (matrix_iterations < 1) throw ConfigError("matrix.iterations must be >= 1");
    if (repetitions < 1) throw ConfigError("repeat.repetitions must be >= 1");
    if (diff_ref_m.size() != 3 || diff_ref_kp.size() != 3 || !(diff_ref_m.array() > 0.0).all() ||
        !(diff_ref_kp.array() > 0.0).all())
        throw ConfigError("diff_ref: m and kp need three positive entries");
    if (!(u_max > 0.0) || !(y_max > 0.0)) throw ConfigError("ilc: u_max and y_max must be > 0");
    if (transfer.n_bar < 0) throw ConfigError("transfer.n_bar must be >= 0");
    if (transfer.cutoff < 0.0 || transfer.ridge < 0.0) throw ConfigError("transfer: cutoff and ridge must be >= 0");
    if (transfer.fit_state == StateSource::closed_loop)
        throw ConfigError("transfer.fit_state: closed_loop is only meaningful when applying a map");
    if (transfer.apply_state == StateSource::rollout)
        throw ConfigError("transfer.apply_state: rollout is only meaningful when fitting a map");
    try {
        ilc.validate(0);
    } catch (const Error& e) {
        throw ConfigError(std::string("ilc: ") + e.what());
    }
    if (ilc.Q.size() != 0 || ilc.R.size() != 0) throw ConfigError("ilc: only scalar weights are configurable");
}

namespace {

using Keys = std::initializer_list<const char*>;

void check_keys(const json& j, Keys allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

double number(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

int integer(const json& j, const char* key, int fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

bool boolean(const json& j, const char* key, bool fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
    return v.get<bool>();
}

std::string text(const json& j, const char* key, const std::string& fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

// Scalar or one entry per axis.
VectorXd per_axis(const json& j, const char* key, const VectorXd& fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number()) return VectorXd::Constant(fallback.size(), v.get<double>());
    const auto out = detail::vector_from_json<ConfigError>(v, where + "." + key);
    if (out.size() != fallback.size())
        throw ConfigError(where + "." + key + ": expected a scalar or " + std::to_string(fallback.size()) + " values");
    return out;
}

// "inf" or a missing key means unbounded.
double bound(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number or null");
    return v.get<double>();
}

PlantModel plant_from_json(const json& j, const PlantModel& fallback, const std::string& where) {
    auto preset = [&](const std::string& name) {
        if (name == "source-like") return PlantModel::source_like();
        if (name == "target-like") return PlantModel::target_like();
        if (name == "ideal") {
            PlantModel m = PlantModel::source_like();
            m.name = "ideal";
            m.ideal = true;
            return m;
        }
        throw ConfigError(where + ": unknown plant preset '" + name + "' (source-like, target-like, ideal)");
    };
    if (j.is_string()) return preset(j.get<std::string>());
    check_keys(j, {"preset", "name", "ideal", "gain", "tau", "drag", "delay", "disturbance"}, where);
    PlantModel m = j.contains("preset") ? preset(text(j, "preset", "", where)) : fallback;
    m.name = text(j, "name", m.name, where);
    m.ideal = boolean(j, "ideal", m.ideal, where);
    m.vehicle.gain = number(j, "gain", m.vehicle.gain, where);
    m.vehicle.tau = number(j, "tau", m.vehicle.tau, where);
    m.vehicle.drag = number(j, "drag", m.vehicle.drag, where);
    m.vehicle.delay = integer(j, "delay", m.vehicle.delay, where);
    if (j.contains("disturbance")) {
        const auto& d = j.at("disturbance");
        const std::string w = where + ".disturbance";
        if (d.is_boolean()) {
            m.disturbance.enabled = d.get<bool>();
        } else {
            check_keys(d, {"enabled", "amplitude", "freq1", "freq2", "lipschitz", "velocity_sat", "noise_std"}, w);
            auto& p = m.disturbance;
            p.enabled = boolean(d, "enabled", p.enabled, w);
            p.amplitude = number(d, "amplitude", p.amplitude, w);
            p.freq1 = number(d, "freq1", p.freq1, w);
            p.freq2 = number(d, "freq2", p.freq2, w);
            p.lipschitz = number(d, "lipschitz", p.lipschitz, w);
            p.velocity_sat = number(d, "velocity_sat", p.velocity_sat, w);
            p.noise_std = number(d, "noise_std", p.noise_std, w);
        }
    }
    return m;
}

L1Config l1_from_json(const json& j, const L1Config& fallback, const std::string& where) {
    check_keys(j, {"m", "omega", "kp", "gamma", "sigma_max", "eps_proj", "lipschitz", "dt_ctrl"}, where);
    L1Config c = fallback;
    c.m = per_axis(j, "m", c.m, where);
    c.omega = per_axis(j, "omega", c.omega, where);
    c.kp = per_axis(j, "kp", c.kp, where);
    c.gamma = number(j, "gamma", c.gamma, where);
    c.sigma_max = number(j, "sigma_max", c.sigma_max, where);
    c.eps_proj = number(j, "eps_proj", c.eps_proj, where);
    c.lipschitz = number(j, "lipschitz", c.lipschitz, where);
    c.dt_ctrl = number(j, "dt_ctrl", c.dt_ctrl, where);
    return c;
}

PlantSetup setup_from_json(const json& j, const PlantSetup& fallback, const std::string& where) {
    check_keys(j, {"plant", "l1"}, where);
    PlantSetup s = fallback;
    if (j.contains("plant")) s.plant = plant_from_json(j.at("plant"), s.plant, where + ".plant");
    if (j.contains("l1")) s.l1 = l1_from_json(j.at("l1"), s.l1, where + ".l1");
    return s;
}

template <class E>
E enum_value(const json& j, const char* key, E fallback, const std::map<std::string, E>& names,
             const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto name = text(j, key, "", where);
    const auto it = names.find(name);
    if (it == names.end()) {
        std::string msg = where + "." + key + ": unknown value '" + name + "'; expected one of";
        for (const auto& [n, v] : names) msg += " " + n;
        throw ConfigError(msg);
    }
    return it->second;
}

const std::map<std::string, TransferVariant> kVariants{{"state", TransferVariant::state},
                                                        {"io", TransferVariant::io}};
const std::map<std::string, FitStructure> kStructures{{"full", FitStructure::full},
                                                       {"decoupled", FitStructure::decoupled}};
const std::map<std::string, StateSource> kSources{{"tracking", StateSource::tracking},
                                                   {"rollout", StateSource::rollout},
                                                   {"closed_loop", StateSource::closed_loop}};

template <class E>
std::string enum_name(E value, const std::map<std::string, E>& names) {
    for (const auto& [n, v] : names)
        if (v == value) return n;
    return "?";
}

json bound_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ExperimentConfig parse_config(std::string_view input) {
    json j;
    try {
        j = json::parse(input.begin(), input.end(), nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg = ExperimentConfig::defaults();
    check_keys(j,
               {"seed", "dt", "duration", "workers", "source", "target", "ilc", "trajectories", "learn", "transfer",
                "matrix", "repeat", "diff_ref"},
               "config");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    cfg.dt = number(j, "dt", cfg.dt, "config");
    cfg.duration = number(j, "duration", cfg.duration, "config");
    cfg.workers = integer(j, "workers", cfg.workers, "config");
    // The sample time is shared by the plants and controllers unless set there.
    for (auto* s : {&cfg.source, &cfg.target}) {
        s->plant.dt = cfg.dt;
        s->l1.dt_ctrl = cfg.dt;
    }
    if (j.contains("source")) cfg.source = setup_from_json(j["source"], cfg.source, "source");
    if (j.contains("target")) cfg.target = setup_from_json(j["target"], cfg.target, "target");
    cfg.source.plant.dt = cfg.target.plant.dt = cfg.dt;
    if (j.contains("ilc")) {
        const auto& c = j["ilc"];
        check_keys(c, {"q_weight", "r_weight", "kalman", "u_max", "y_max", "absolute_constraints"}, "ilc");
        cfg.ilc.q_weight = number(c, "q_weight", cfg.ilc.q_weight, "ilc");
        cfg.ilc.r_weight = number(c, "r_weight", cfg.ilc.r_weight, "ilc");
        cfg.u_max = bound(c, "u_max", cfg.u_max, "ilc");
        cfg.y_max = bound(c, "y_max", cfg.y_max, "ilc");
        cfg.absolute_constraints = boolean(c, "absolute_constraints", cfg.absolute_constraints, "ilc");
        if (c.contains("kalman")) {
            const auto& k = c["kalman"];
            check_keys(k, {"p0", "q_proc", "q_meas"}, "ilc.kalman");
            cfg.ilc.kalman.p0 = number(k, "p0", cfg.ilc.kalman.p0, "ilc.kalman");
            cfg.ilc.kalman.q_proc = number(k, "q_proc", cfg.ilc.kalman.q_proc, "ilc.kalman");
            cfg.ilc.kalman.q_meas = number(k, "q_meas", cfg.ilc.kalman.q_meas, "ilc.kalman");
        }
    }
    if (j.contains("trajectories")) {
        const auto& t = j["trajectories"];
        if (!t.is_array()) throw ConfigError("trajectories: expected an array of names");
        cfg.trajectories.clear();
        for (const auto& n : t) {
            if (!n.is_string()) throw ConfigError("trajectories: expected an array of names");
            cfg.trajectories.push_back(n.get<std::string>());
        }
    }
    if (j.contains("learn")) {
        check_keys(j["learn"], {"iterations"}, "learn");
        cfg.learn_iterations = integer(j["learn"], "iterations", cfg.learn_iterations, "learn");
    }
    if (j.contains("transfer")) {
        const auto& t = j["transfer"];
        const std::string w = "transfer";
        check_keys(t,
                   {"source", "target", "iterations", "variant", "structure", "fit_state", "apply_state", "n_bar",
                    "cutoff", "ridge"},
                   w);
        cfg.transfer_source = text(t, "source", cfg.transfer_source, w);
        cfg.transfer_target = text(t, "target", cfg.transfer_target, w);
        cfg.transfer_iterations = integer(t, "iterations", cfg.transfer_iterations, w);
        auto& s = cfg.transfer;
        s.variant = enum_value(t, "variant", s.variant, kVariants, w);
        s.structure = enum_value(t, "structure", s.structure, kStructures, w);
        s.fit_state = enum_value(t, "fit_state", s.fit_state, kSources, w);
        s.apply_state = enum_value(t, "apply_state", s.apply_state, kSources, w);
        s.n_bar = integer(t, "n_bar", s.n_bar, w);
        s.cutoff = number(t, "cutoff", s.cutoff, w);
        s.ridge = number(t, "ridge", s.ridge, w);
    }
    if (j.contains("matrix")) {
        check_keys(j["matrix"], {"iterations", "transfer"}, "matrix");
        cfg.matrix_iterations = integer(j["matrix"], "iterations", cfg.matrix_iterations, "matrix");
        cfg.matrix_transfer = boolean(j["matrix"], "transfer", cfg.matrix_transfer, "matrix");
    }
    if (j.contains("repeat")) {
        check_keys(j["repeat"], {"repetitions"}, "repeat");
        cfg.repetitions = integer(j["repeat"], "repetitions", cfg.repetitions, "repeat");
    }
    if (j.contains("diff_ref")) {
        check_keys(j["diff_ref"], {"m", "kp"}, "diff_ref");
        cfg.diff_ref_m = per_axis(j["diff_ref"], "m", cfg.diff_ref_m, "diff_ref");
        cfg.diff_ref_kp = per_axis(j["diff_ref"], "kp", cfg.diff_ref_kp, "diff_ref");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::string content;
    try {
        content = read_text_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_config(content);
}

namespace {

json setup_json(const PlantSetup& s) {
    const auto& p = s.plant;
    const auto& d = p.disturbance;
    json plant = {{"name", p.name},
                  {"ideal", p.ideal},
                  {"gain", p.vehicle.gain},
                  {"tau", p.vehicle.tau},
                  {"drag", p.vehicle.drag},
                  {"delay", p.vehicle.delay},
                  {"disturbance",
                   {{"enabled", d.enabled},
                    {"amplitude", d.amplitude},
                    {"freq1", d.freq1},
                    {"freq2", d.freq2},
                    {"lipschitz", d.lipschitz},
                    {"velocity_sat", d.velocity_sat},
                    {"noise_std", d.noise_std}}}};
    const auto& c = s.l1;
    json l1 = {{"m", detail::vector_to_json(c.m)},
               {"omega", detail::vector_to_json(c.omega)},
               {"kp", detail::vector_to_json(c.kp)},
               {"gamma", c.gamma},
               {"sigma_max", c.sigma_max},
               {"eps_proj", c.eps_proj},
               {"lipschitz", c.lipschitz},
               {"dt_ctrl", c.dt_ctrl}};
    return {{"plant", plant}, {"l1", l1}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    const auto& t = cfg.transfer;
    json j = {{"seed", cfg.seed},
              {"dt", cfg.dt},
              {"duration", cfg.duration},
              {"source", setup_json(cfg.source)},
              {"target", setup_json(cfg.target)},
              {"ilc",
               {{"q_weight", cfg.ilc.q_weight},
                {"r_weight", cfg.ilc.r_weight},
                {"u_max", bound_json(cfg.u_max)},
                {"y_max", bound_json(cfg.y_max)},
                {"absolute_constraints", cfg.absolute_constraints},
                {"kalman", {{"p0", cfg.ilc.kalman.p0}, {"q_proc", cfg.ilc.kalman.q_proc}, {"q_meas", cfg.ilc.kalman.q_meas}}}}},
              {"trajectories", cfg.trajectories},
              {"learn", {{"iterations", cfg.learn_iterations}}},
              {"transfer",
               {{"source", cfg.transfer_source},
                {"target", cfg.transfer_target},
                {"iterations", cfg.transfer_iterations},
                {"variant", enum_name(t.variant, kVariants)},
                {"structure", enum_name(t.structure, kStructures)},
                {"fit_state", enum_name(t.fit_state, kSources)},
                {"apply_state", enum_name(t.apply_state, kSources)},
                {"n_bar", t.n_bar},
                {"cutoff", t.cutoff},
                {"ridge", t.ridge}}},
              {"matrix", {{"iterations", cfg.matrix_iterations}, {"transfer", cfg.matrix_transfer}}},
              {"repeat", {{"repetitions", cfg.repetitions}}},
              {"diff_ref", {{"m", detail::vector_to_json(cfg.diff_ref_m)}, {"kp", detail::vector_to_json(cfg.diff_ref_kp)}}}};
    return j.dump();
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    for (auto s : stream) h = mix(h ^ mix(s));
    return h;
}

// ---------------------------------------------------------------------------
// Artifacts and plumbing

fs::path learned_input_path(const fs::path& out, const std::string& trajectory) {
    return out / "learned" / (trajectory + ".u.txt");
}

fs::path learned_desired_path(const fs::path& out, const std::string& trajectory) {
    return out / "learned" / (trajectory + ".ystar.txt");
}

void save_learned(const fs::path& out, const LearnedPair& pair) {
    save_signal(learned_input_path(out, pair.trajectory), pair.u);
    save_signal(learned_desired_path(out, pair.trajectory), pair.y_desired);
}

LearnedPair load_learned(const fs::path& out, const std::string& trajectory) {
    LearnedPair pair;
    pair.trajectory = trajectory;
    pair.u = load_signal(learned_input_path(out, trajectory));
    pair.y_desired = load_signal(learned_desired_path(out, trajectory));
    if (pair.u.rows() != 3 || pair.y_desired.rows() != 3 || pair.y_desired.cols() != pair.u.cols() + 1)
        throw InvalidArgument("learned pair for '" + trajectory + "' has inconsistent shapes");
    return pair;
}

int exit_code_for(const std::exception& e) {
    if (const auto* f = dynamic_cast<const ExperimentFailure*>(&e)) return f->exit_code();
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    return kExitFault;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& f) {
    std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers)
                                      : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

// diff-ref draws from the matrix stream, so an unmodified reference model reproduces the matrix cells.
enum Stream : std::uint64_t { kLearn = 1, kTransfer, kMatrix, kRepeat };

std::uint64_t trajectory_id(const std::string& name) {
    const auto& names = trajectory_names();
    return static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

/// A plant with its controller, the reference model it follows and the ILC
/// input update for that model.
struct Stack {
    PlantSetup setup;
    StateSpaceModel reference;
    std::shared_ptr<const IlcUpdater> updater;
};

IlcConfig ilc_with_constraints(const ExperimentConfig& cfg, Eigen::Index size) {
    IlcConfig ilc = cfg.ilc;
    if (!std::isfinite(cfg.u_max) && !std::isfinite(cfg.y_max)) return ilc;
    IlcConstraints c;
    c.absolute = cfg.absolute_constraints;
    MatrixXd box(2 * size, size);
    box << MatrixXd::Identity(size, size), -MatrixXd::Identity(size, size);
    if (std::isfinite(cfg.u_max)) {
        c.Z_c = box;
        c.u_max = VectorXd::Constant(2 * size, cfg.u_max);
    }
    if (std::isfinite(cfg.y_max)) {
        c.S_c = box;
        c.y_max = VectorXd::Constant(2 * size, cfg.y_max);
    }
    ilc.constraints = std::move(c);
    return ilc;
}

Eigen::Index horizon(const ExperimentConfig& cfg) { return std::llround(cfg.duration / cfg.dt); }

Stack make_stack(const ExperimentConfig& cfg, const PlantSetup& setup) {
    auto reference = discretize_reference(setup.l1.kp, setup.l1.m, cfg.dt);
    const auto N = static_cast<int>(horizon(cfg));
    auto lifted = lifted_representation(reference, N);
    auto ilc = ilc_with_constraints(cfg, lifted.size());
    auto updater = std::make_shared<const IlcUpdater>(std::move(lifted), std::move(ilc));
    return {setup, std::move(reference), std::move(updater)};
}

Trajectory make_trajectory(const ExperimentConfig& cfg, const std::string& name) {
    return trajectory_library(name, cfg.duration, cfg.dt);
}

IlcOffsets offsets_for(const Trajectory& traj) { return {lift(traj.targets()), lift(traj.nominal_input())}; }

/// Learning on `stack`, optionally warm-started. Every rollout seed depends
/// on the stream and the iteration only, so paired arms see the same noise.
LearningRecord learn_on(const ExperimentConfig& cfg, const Stack& stack, const Trajectory& traj,
                        std::initializer_list<std::uint64_t> stream_prefix, int iterations,
                        std::optional<IlcState> warm) {
    std::vector<std::uint64_t> prefix(stream_prefix);
    const RolloutFn fn = [&](int it, const VectorXd& du) {
        std::uint64_t seed = cfg.seed;
        for (auto s : prefix) seed = derive_seed(seed, {s});
        seed = derive_seed(seed, {static_cast<std::uint64_t>(it)});
        const Signal u2 = traj.nominal_input() + unlift(du, 3);
        const auto r = rollout(stack.setup.plant, stack.setup.l1, stack.reference, u2, traj.samples, seed);
        return RolloutOutcome{lift(r.y2 - traj.targets()), r.error};
    };
    const auto offsets = offsets_for(traj);
    return run_ilc(fn, *stack.updater, iterations, std::move(warm), &offsets);
}

void require_ok(const LearningRecord& rec, const std::string& what) {
    if (!rec.ok()) throw ExperimentFailure(what + ": " + *rec.failure, kExitFault);
}

struct TransferOutcome {
    TransferMap map;
    Signal u;  // absolute command for the target trajectory, 3 x N
};

/**
 * Fit on (learned pair, `fit_model`) and apply to `target` with `apply_model`.
 * The learned input is first mapped onto `fit_model` when it was learned on a
 * different reference model.
 */
TransferOutcome transfer_input(const TransferSettings& ts, const LearnedPair& learned, const StateSpaceModel& learned_on,
                               const StateSpaceModel& model, const Trajectory& target) {
    const bool same = learned_on.A().isApprox(model.A(), 0.0) && learned_on.B().isApprox(model.B(), 0.0) &&
                      learned_on.C().isApprox(model.C(), 0.0);
    const Signal u = same ? learned.u : map_between_reference_models(learned.u, learned_on, model);
    const auto vrd = vector_relative_degree(model);
    const auto N = u.cols();
    const Signal y_src = hold_extend(learned.y_desired, vrd.max() - 1);

    FitOptions fo;
    fo.cutoff = ts.cutoff;
    fo.ridge = ts.ridge;
    fo.structure = ts.structure;
    if (ts.structure == FitStructure::decoupled && ts.variant == TransferVariant::state)
        fo.state_channels = state_channel_partition(model);
    const int n_bar = ts.n_bar > 0 ? ts.n_bar : static_cast<int>(model.states());

    TransferOutcome out;
    if (ts.variant == TransferVariant::state) {
        const MatrixXd x = ts.fit_state == StateSource::tracking ? perfect_tracking_input(model, vrd, y_src).x
                                                                 : simulate(model, u).x;
        out.map = fit_transfer_map(build_window_state(x, y_src, vrd), u, ts.variant, vrd, 0, fo);
    } else {
        Signal y(3, N + 1);
        if (ts.fit_state == StateSource::tracking) {
            y = learned.y_desired;
        } else {
            y.col(0).setZero();
            y.rightCols(N) = simulate(model, u).y;
        }
        out.map = fit_transfer_map(build_window_io(u, y, y_src, vrd, n_bar), u, ts.variant, vrd, n_bar, fo);
    }

    const Signal y_new = hold_extend(target.samples, vrd.max());
    if (ts.apply_state == StateSource::closed_loop) {
        ModelFeedback fb(model);
        out.u = apply_transfer_map_online(out.map, y_new, fb, N);
    } else if (ts.variant == TransferVariant::state) {
        RecordedFeedback fb(perfect_tracking_input(model, vrd, y_new).x, Signal());
        out.u = apply_transfer_map_online(out.map, y_new, fb, N);
    } else {
        RecordedFeedback fb(MatrixXd(), target.samples);
        out.u = apply_transfer_map_online(out.map, y_new, fb, N);
    }
    const double scale = 1.0 + target.samples.cwiseAbs().maxCoeff();
    if (!out.u.allFinite() || out.u.cwiseAbs().maxCoeff() > 1e6 * scale)
        throw ExperimentFailure("transfer to '" + target.name + "' produced a diverging input", kExitFault);
    return out;
}

IlcState warm_start(const Stack& stack, const Signal& u, const Trajectory& traj, const ExperimentConfig& cfg) {
    return init_from_transfer(lift(u - traj.nominal_input()), stack.updater->model(), cfg.ilc.kalman);
}

std::vector<LearnedPair> require_learned(const ExperimentConfig& cfg, const fs::path& out,
                                         const std::vector<std::string>& names) {
    std::vector<std::string> missing;
    for (const auto& n : names)
        if (!fs::exists(learned_input_path(out, n)) || !fs::exists(learned_desired_path(out, n))) missing.push_back(n);
    if (!missing.empty()) {
        std::string msg = "missing learned artifacts (run `learn` first):";
        for (const auto& n : missing) msg += " " + n;
        throw ExperimentFailure(msg, kExitConfig);
    }
    std::vector<LearnedPair> pairs;
    for (const auto& n : names) {
        auto p = load_learned(out, n);
        if (p.u.cols() != horizon(cfg))
            throw ExperimentFailure("learned artifact '" + n + "' does not match the configured duration", kExitConfig);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void emit(CommandResult& result, const fs::path& path, Report report, const std::string& config) {
    write_report(path, report, config);
    result.files.push_back(path);
    result.reports.push_back(std::move(report));
}

void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

Column num(const char* name) { return {name, ColumnType::number}; }
Column count(const char* name) { return {name, ColumnType::integer}; }
Column txt(const char* name) { return {name, ColumnType::text}; }

double max_ratio(const LearningRecord& rec) {
    double m = 1.0;
    for (const auto& it : rec.iterations) m = std::max(m, it.error / rec.iterations.front().error);
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

CommandResult cmd_learn(const ExperimentConfig& cfg, const fs::path& out, const Logger& log) {
    cfg.validate();
    const auto config = config_to_json(cfg);
    const Stack stack = make_stack(cfg, cfg.source);
    const auto& names = cfg.trajectories;
    std::vector<LearningRecord> records(names.size());
    parallel_for(names.size(), cfg.workers, [&](std::size_t i) {
        const auto traj = make_trajectory(cfg, names[i]);
        records[i] = learn_on(cfg, stack, traj, {kLearn, trajectory_id(names[i])}, cfg.learn_iterations, std::nullopt);
    });

    CommandResult result;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& rec = records[i];
        Report r{{count("iteration"), num("error"), num("max_input"), count("active_constraints")}, {}};
        for (const auto& it : rec.iterations)
            r.rows.push_back({std::int64_t{it.iteration}, it.error, it.max_input, std::int64_t{it.active_constraints}});
        emit(result, out / "learn" / (names[i] + ".csv"), std::move(r), config);
        if (!rec.iterations.empty()) {
            const auto traj = make_trajectory(cfg, names[i]);
            save_learned(out, {names[i], traj.samples, traj.nominal_input() + unlift(rec.iterations.back().u, 3)});
            result.files.push_back(learned_input_path(out, names[i]));
            result.files.push_back(learned_desired_path(out, names[i]));
            say(log, "learn " + names[i] + ": error " + format_double(rec.iterations.front().error) + " -> " +
                         format_double(rec.iterations.back().error));
        }
    }
    for (std::size_t i = 0; i < names.size(); ++i) require_ok(records[i], "learn " + names[i]);
    return result;
}

CommandResult cmd_transfer(const ExperimentConfig& cfg, const fs::path& out, const Logger& log) {
    cfg.validate();
    const auto config = config_to_json(cfg);
    const auto learned = require_learned(cfg, out, {cfg.transfer_source}).front();
    const Stack src = make_stack(cfg, cfg.source);
    const Stack tgt = make_stack(cfg, cfg.target);
    const auto traj = make_trajectory(cfg, cfg.transfer_target);
    const auto xfer = transfer_input(cfg.transfer, learned, src.reference, tgt.reference, traj);
    const int trials = 1 + cfg.transfer_iterations;
    const std::uint64_t s = trajectory_id(cfg.transfer_source), t = trajectory_id(cfg.transfer_target);
    LearningRecord with, without;
    parallel_for(2, cfg.workers, [&](std::size_t arm) {
        if (arm == 0) with = learn_on(cfg, tgt, traj, {kTransfer, s, t}, trials, warm_start(tgt, xfer.u, traj, cfg));
        else without = learn_on(cfg, tgt, traj, {kTransfer, s, t}, trials, std::nullopt);
    });

    CommandResult result;
    write_text_file(out / "transfer" / "map.json", transfer_map_to_json(xfer.map) + "\n");
    save_signal(out / "transfer" / "input.txt", xfer.u);
    result.files.push_back(out / "transfer" / "map.json");
    result.files.push_back(out / "transfer" / "input.txt");
    Report r{{count("iteration"), num("error_with_transfer"), num("error_without_transfer")}, {}};
    const auto rows = std::min(with.iterations.size(), without.iterations.size());
    for (std::size_t i = 0; i < rows; ++i)
        r.rows.push_back({std::int64_t{with.iterations[i].iteration}, with.iterations[i].error, without.iterations[i].error});
    emit(result, out / "transfer" / "transfer.csv", std::move(r), config);
    require_ok(with, "transfer arm");
    require_ok(without, "baseline arm");
    say(log, "transfer " + cfg.transfer_source + " -> " + cfg.transfer_target + ": first-trial error " +
                 format_double(without.iterations.front().error) + " -> " + format_double(with.iterations.front().error));
    return result;
}

CommandResult cmd_matrix(const ExperimentConfig& cfg, const fs::path& out, const Logger& log) {
    cfg.validate();
    const auto config = config_to_json(cfg);
    const auto& names = cfg.trajectories;
    const auto learned = require_learned(cfg, out, names);
    const Stack src = make_stack(cfg, cfg.source);
    const Stack tgt = make_stack(cfg, cfg.target);
    const auto n = names.size();

    // The baseline arm depends on the target only.
    std::vector<double> baseline(n);
    parallel_for(n, cfg.workers, [&](std::size_t t) {
        const auto traj = make_trajectory(cfg, names[t]);
        auto rec = learn_on(cfg, tgt, traj, {kMatrix, trajectory_id(names[t])}, 1, std::nullopt);
        require_ok(rec, "baseline " + names[t]);
        baseline[t] = rec.iterations.front().error;
    });
    std::vector<LearningRecord> cells(n * n);
    parallel_for(n * n, cfg.workers, [&](std::size_t c) {
        const auto s = c / n, t = c % n;
        const auto traj = make_trajectory(cfg, names[t]);
        std::optional<IlcState> warm;
        if (cfg.matrix_transfer)
            warm = warm_start(tgt, transfer_input(cfg.transfer, learned[s], src.reference, tgt.reference, traj).u, traj, cfg);
        cells[c] = learn_on(cfg, tgt, traj, {kMatrix, trajectory_id(names[t])}, cfg.matrix_iterations, std::move(warm));
        require_ok(cells[c], "cell " + names[s] + " -> " + names[t]);
    });

    CommandResult result;
    Report r{{txt("source"), txt("target"), num("error_without"), num("error_with"), num("reduction_percent"),
              num("final_error_with"), num("max_ratio_with")},
             {}};
    std::vector<double> reductions;
    double min_diag = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n * n; ++c) {
        const auto s = c / n, t = c % n;
        const auto& rec = cells[c];
        const double e = rec.iterations.front().error;
        const double red = percent_reduction(baseline[t], e);
        reductions.push_back(red);
        if (s == t) min_diag = std::min(min_diag, red);
        r.rows.push_back({names[s], names[t], baseline[t], e, red, rec.iterations.back().error, max_ratio(rec)});
    }
    emit(result, out / "matrix" / "matrix.csv", std::move(r), config);
    const auto stats = mean_std(reductions);
    Report summary{{count("cells"), num("mean_reduction_percent"), num("std_reduction_percent"),
                    num("min_diagonal_reduction_percent"), num("min_reduction_percent")},
                   {{static_cast<std::int64_t>(n * n), stats.mean, stats.std, min_diag,
                     *std::min_element(reductions.begin(), reductions.end())}}};
    emit(result, out / "matrix" / "summary.csv", std::move(summary), config);
    say(log, "matrix: mean reduction " + format_double(stats.mean) + " %, min diagonal " + format_double(min_diag) + " %");
    return result;
}

CommandResult cmd_repeat(const ExperimentConfig& cfg, const fs::path& out, const Logger& log) {
    cfg.validate();
    const auto config = config_to_json(cfg);
    const auto learned = require_learned(cfg, out, {cfg.transfer_source}).front();
    const Stack src = make_stack(cfg, cfg.source);
    const Stack tgt = make_stack(cfg, cfg.target);
    const auto traj = make_trajectory(cfg, cfg.transfer_target);
    const auto xfer = transfer_input(cfg.transfer, learned, src.reference, tgt.reference, traj);
    const int trials = 1 + cfg.transfer_iterations;
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    const std::uint64_t s = trajectory_id(cfg.transfer_source), t = trajectory_id(cfg.transfer_target);
    std::vector<LearningRecord> runs(2 * reps);
    parallel_for(2 * reps, cfg.workers, [&](std::size_t c) {
        const auto rep = c / 2;
        std::optional<IlcState> warm;
        if (c % 2 == 0) warm = warm_start(tgt, xfer.u, traj, cfg);
        runs[c] = learn_on(cfg, tgt, traj, {kRepeat, s, t, rep}, trials, std::move(warm));
        require_ok(runs[c], "repetition " + std::to_string(rep));
    });

    CommandResult result;
    Report r{{count("iteration"), num("mean_with_transfer"), num("std_with_transfer"), num("mean_without_transfer"),
              num("std_without_transfer")},
             {}};
    for (int it = 0; it < trials; ++it) {
        std::vector<double> with, without;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            with.push_back(runs[2 * rep].iterations[static_cast<std::size_t>(it)].error);
            without.push_back(runs[2 * rep + 1].iterations[static_cast<std::size_t>(it)].error);
        }
        const auto a = mean_std(with), b = mean_std(without);
        r.rows.push_back({std::int64_t{it + 1}, a.mean, a.std, b.mean, b.std});
    }
    emit(result, out / "repeat" / "repeat.csv", std::move(r), config);
    say(log, "repeat: " + std::to_string(reps) + " repetitions of " + std::to_string(trials) + " trials");
    return result;
}

CommandResult cmd_diff_ref(const ExperimentConfig& cfg, const fs::path& out, const Logger& log) {
    cfg.validate();
    const auto config = config_to_json(cfg);
    const auto& names = cfg.trajectories;
    const auto learned = require_learned(cfg, out, names);
    PlantSetup modified = cfg.target;
    modified.l1.m = cfg.diff_ref_m;
    modified.l1.kp = cfg.diff_ref_kp;
    const Stack src = make_stack(cfg, cfg.source);
    const Stack tgt = make_stack(cfg, modified);
    const auto n = names.size();

    std::vector<double> baseline(n);
    parallel_for(n, cfg.workers, [&](std::size_t t) {
        const auto traj = make_trajectory(cfg, names[t]);
        auto rec = learn_on(cfg, tgt, traj, {kMatrix, trajectory_id(names[t])}, 1, std::nullopt);
        require_ok(rec, "baseline " + names[t]);
        baseline[t] = rec.iterations.front().error;
    });
    // Per cell: [mapped, naive] first-trial errors.
    std::vector<std::array<double, 2>> cells(n * n);
    parallel_for(n * n, cfg.workers, [&](std::size_t c) {
        const auto s = c / n, t = c % n;
        const auto traj = make_trajectory(cfg, names[t]);
        const auto mapped = transfer_input(cfg.transfer, learned[s], src.reference, tgt.reference, traj);
        // Naive: the source reference model stands in for the target one.
        const auto naive = transfer_input(cfg.transfer, learned[s], src.reference, src.reference, traj);
        for (int arm = 0; arm < 2; ++arm) {
            const auto& u = arm == 0 ? mapped.u : naive.u;
            auto rec = learn_on(cfg, tgt, traj, {kMatrix, trajectory_id(names[t])}, 1, warm_start(tgt, u, traj, cfg));
            require_ok(rec, "cell " + names[s] + " -> " + names[t]);
            cells[c][static_cast<std::size_t>(arm)] = rec.iterations.front().error;
        }
    });

    CommandResult result;
    Report r{{txt("source"), txt("target"), num("error_without"), num("error_mapped"), num("error_naive"),
              num("reduction_mapped_percent"), num("reduction_naive_percent")},
             {}};
    std::vector<double> mapped, naive;
    for (std::size_t c = 0; c < n * n; ++c) {
        const auto s = c / n, t = c % n;
        mapped.push_back(percent_reduction(baseline[t], cells[c][0]));
        naive.push_back(percent_reduction(baseline[t], cells[c][1]));
        r.rows.push_back({names[s], names[t], baseline[t], cells[c][0], cells[c][1], mapped.back(), naive.back()});
    }
    emit(result, out / "diff_ref" / "diff_ref.csv", std::move(r), config);
    const auto a = mean_std(mapped), b = mean_std(naive);
    Report summary{{count("cells"), num("mean_reduction_mapped_percent"), num("mean_reduction_naive_percent"),
                    num("min_reduction_mapped_percent")},
                   {{static_cast<std::int64_t>(n * n), a.mean, b.mean, *std::min_element(mapped.begin(), mapped.end())}}};
    emit(result, out / "diff_ref" / "summary.csv", std::move(summary), config);
    say(log, "diff-ref: mean reduction mapped " + format_double(a.mean) + " %, naive " + format_double(b.mean) + " %");
    return result;
}

CommandResult cmd_relative_degree(const ExperimentConfig& cfg, const fs::path& out, const Logger& log) {
    cfg.validate();
    const auto config = config_to_json(cfg);
    struct Named {
        std::string name;
        StateSpaceModel model;
    };
    const std::vector<Named> models{
        {"source-reference", discretize_reference(cfg.source.l1.kp, cfg.source.l1.m, cfg.dt)},
        {"target-reference", discretize_reference(cfg.target.l1.kp, cfg.target.l1.m, cfg.dt)},
        {"diff-ref-target", discretize_reference(cfg.diff_ref_kp, cfg.diff_ref_m, cfg.dt)}};

    CommandResult result;
    Report r{{txt("model"), count("channel"), count("r_analytic"), count("r_step"), num("a0"), num("y_r"),
              count("y_r_full_rank"), count("minimum_phase")},
             {}};
    for (const auto& m : models) {
        const auto vrd = vector_relative_degree(m.model);
        const auto est = estimate_relative_degree_from_steps(step_experiments(m.model, 2 * static_cast<int>(m.model.states()) + 2));
        const auto mp = minimum_phase_check(m.model, vrd);
        for (Eigen::Index i = 0; i < m.model.channels(); ++i) {
            const auto ui = static_cast<std::size_t>(i);
            r.rows.push_back({m.name, std::int64_t{i}, std::int64_t{vrd.r[ui]}, std::int64_t{est.vrd.r[ui]}, vrd.A0(i, i),
                              est.Y_r(i, i), std::int64_t{est.full_rank}, std::int64_t{mp.minimum_phase}});
        }
        say(log, m.name + ": r = " + std::to_string(vrd.r.front()) + (mp.minimum_phase ? ", minimum phase" : ", non-minimum phase"));
    }
    emit(result, out / "relative_degree" / "relative_degree.csv", std::move(r), config);

    Report l1{{txt("plant"), num("norm"), num("bound"), num("tail"), count("stable"), count("satisfied")}, {}};
    for (const auto* s : {&cfg.source, &cfg.target}) {
        const auto rep = verify_l1_norm_condition(s->plant.velocity_model(), s->l1, 20.0);
        l1.rows.push_back({s->plant.name, rep.norm, rep.bound, rep.tail, std::int64_t{rep.stable}, std::int64_t{rep.satisfied}});
        say(log, s->plant.name + ": L1-norm bound " + format_double(rep.bound));
    }
    emit(result, out / "relative_degree" / "l1_condition.csv", std::move(l1), config);
    return result;
}

}  // namespace xfer
