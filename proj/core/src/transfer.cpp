#include "xfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json_util.hpp"
#include "xfer/error.hpp"

namespace xfer {

using detail::json;

namespace {

void check_vrd(const VectorRelativeDegree& vrd, Eigen::Index p, const char* who) {
    if (static_cast<Eigen::Index>(vrd.r.size()) != p || vrd.A0.rows() != p || vrd.A0.cols() != p)
        throw DimensionError(std::string(who) + ": relative degree does not match the channel count");
    for (int r : vrd.r)
        if (r < 1) throw InvalidArgument(std::string(who) + ": relative degrees must be >= 1");
}

// y*_i(a + r_i) for every channel.
VectorXd shifted_desired(const Signal& y_desired, const VectorRelativeDegree& vrd, Eigen::Index a) {
    VectorXd v(y_desired.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = y_desired(i, a + vrd.r[static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace

PerfectTracking perfect_tracking_input(const StateSpaceModel& model, const VectorRelativeDegree& vrd,
                                       const Signal& y_desired, const VectorXd& x0) {
    const auto p = model.channels();
    const auto n = model.states();
    check_vrd(vrd, p, "perfect_tracking_input");
    if (y_desired.rows() != p) throw DimensionError("perfect_tracking_input: y_desired has wrong channel count");
    if (x0.size() != n) throw DimensionError("perfect_tracking_input: x0 has wrong length");
    const Eigen::Index K = y_desired.cols() - vrd.max();
    if (K < 0) throw InvalidArgument("perfect_tracking_input: y_desired shorter than the relative degree");

    Eigen::PartialPivLU<MatrixXd> lu(vrd.A0);
    if (std::abs(lu.determinant()) == 0.0 || !std::isfinite(lu.determinant()))
        throw UndefinedRelativeDegree("perfect_tracking_input: A0 is singular");
    const MatrixXd rows = relative_degree_rows(model, vrd);

    PerfectTracking out;
    out.minimum_phase = minimum_phase_check(model, vrd).minimum_phase;
    out.u.resize(p, K);
    out.x.resize(n, K + 1);
    out.y.resize(p, K);
    out.x.col(0) = x0;
    for (Eigen::Index k = 0; k < K; ++k) {
        const VectorXd xk = out.x.col(k);
        out.u.col(k) = lu.solve(shifted_desired(y_desired, vrd, k) - rows * xk);
        out.x.col(k + 1) = model.A() * xk + model.B() * out.u.col(k);
        out.y.col(k) = model.C() * out.x.col(k + 1);
    }
    return out;
}

PerfectTracking perfect_tracking_input(const StateSpaceModel& model, const VectorRelativeDegree& vrd,
                                       const Signal& y_desired) {
    return perfect_tracking_input(model, vrd, y_desired, VectorXd::Zero(model.states()));
}

Signal hold_extend(const Signal& s, Eigen::Index extra) {
    if (extra < 0) throw InvalidArgument("hold_extend: extra must be >= 0");
    if (s.cols() == 0) throw InvalidArgument("hold_extend: empty signal");
    Signal out(s.rows(), s.cols() + extra);
    out.leftCols(s.cols()) = s;
    for (Eigen::Index k = 0; k < extra; ++k) out.col(s.cols() + k) = s.col(s.cols() - 1);
    return out;
}

MatrixXd build_window_state(const MatrixXd& x_traj, const Signal& y_desired,
                            const VectorRelativeDegree& vrd) {
    const auto p = y_desired.rows();
    check_vrd(vrd, p, "build_window_state");
    const Eigen::Index N = y_desired.cols() - 1;
    const Eigen::Index Nr = N - vrd.max();
    if (Nr < 0) throw InvalidArgument("build_window_state: trajectory shorter than the relative degree");
    if (x_traj.cols() < Nr + 1) throw DimensionError("build_window_state: state trajectory too short");
    const auto n = x_traj.rows();
    MatrixXd W(Nr + 1, n + p);
    for (Eigen::Index a = 0; a <= Nr; ++a) {
        W.row(a).head(n) = x_traj.col(a).transpose();
        W.row(a).tail(p) = shifted_desired(y_desired, vrd, a).transpose();
    }
    return W;
}

MatrixXd build_window_io(const Signal& u, const Signal& y, const Signal& y_desired,
                         const VectorRelativeDegree& vrd, int n_bar) {
    const auto p = y_desired.rows();
    check_vrd(vrd, p, "build_window_io");
    if (n_bar < 1) throw InvalidArgument("build_window_io: n_bar must be >= 1");
    if (u.rows() != p || y.rows() != p) throw DimensionError("build_window_io: channel count mismatch");
    const Eigen::Index N = y_desired.cols() - 1;
    const Eigen::Index Nr = N - vrd.max();
    if (Nr < 0) throw InvalidArgument("build_window_io: trajectory shorter than the relative degree");
    if (u.cols() < Nr || y.cols() < Nr) throw DimensionError("build_window_io: input/output history too short");
    const Eigen::Index w = n_bar * p;
    MatrixXd W = MatrixXd::Zero(Nr + 1, 2 * w + p);
    for (Eigen::Index a = 0; a <= Nr; ++a) {
        for (Eigen::Index i = 0; i < n_bar; ++i) {
            const Eigen::Index k = a - n_bar + i;
            if (k < 0) continue;
            W.row(a).segment(i * p, p) = u.col(k).transpose();
            W.row(a).segment(w + i * p, p) = y.col(k).transpose();
        }
        W.row(a).tail(p) = shifted_desired(y_desired, vrd, a).transpose();
    }
    return W;
}

Eigen::Index TransferMap::history_width() const {
    const auto p = channels();
    if (variant == TransferVariant::state) return theta.rows() - p;
    return static_cast<Eigen::Index>(n_bar) * p;
}

MatrixXd solve_least_squares(const MatrixXd& W, const MatrixXd& targets, const FitOptions& options,
                             TransferDiagnostics* diagnostics) {
    if (W.rows() != targets.rows()) throw DimensionError("least squares: row count mismatch");
    if (options.cutoff < 0.0 || options.ridge < 0.0)
        throw InvalidArgument("least squares: cutoff and ridge must be >= 0");
    if (!W.allFinite() || !targets.allFinite()) throw InvalidArgument("least squares: non-finite data");

    Eigen::BDCSVD<MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double floor = options.cutoff * smax;
    VectorXd inv = VectorXd::Zero(s.size());
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > floor && s(i) > 0.0) {
            inv(i) = s(i) / (s(i) * s(i) + options.ridge);
            ++rank;
        }
    }
    MatrixXd theta = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * targets);
    if (diagnostics) {
        diagnostics->rank = rank;
        diagnostics->rank_deficient = rank < std::min(W.rows(), W.cols());
        const double smin = s.size() > 0 ? s(s.size() - 1) : 0.0;
        diagnostics->condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        diagnostics->residual_norm = (W * theta - targets).norm();
    }
    return theta;
}

std::vector<int> state_channel_partition(const StateSpaceModel& model) {
    const auto n = model.states();
    const auto p = model.channels();
    MatrixXd seen = MatrixXd::Zero(p, n);
    MatrixXd CAk = model.C();
    for (Eigen::Index k = 0; k < n; ++k) {
        seen += CAk.cwiseAbs();
        CAk = CAk * model.A();
    }
    const double tol = 1e-12 * std::max(1.0, seen.maxCoeff());
    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
            if (seen(i, j) <= tol) continue;
            if (owner[static_cast<std::size_t>(j)] >= 0)
                throw InvalidArgument("state_channel_partition: state " + std::to_string(j) +
                                      " is observed by more than one output");
            owner[static_cast<std::size_t>(j)] = static_cast<int>(i);
        }
        if (owner[static_cast<std::size_t>(j)] < 0)
            throw InvalidArgument("state_channel_partition: state " + std::to_string(j) + " is unobservable");
    }
    return owner;
}

namespace {

// Regressor columns channel i may use under the decoupled structure.
std::vector<Eigen::Index> channel_columns(TransferVariant variant, Eigen::Index width, Eigen::Index p, int n_bar,
                                          const std::vector<int>& state_channels, Eigen::Index i) {
    std::vector<Eigen::Index> cols;
    if (variant == TransferVariant::state) {
        const auto n = width - p;
        if (static_cast<Eigen::Index>(state_channels.size()) != n)
            throw InvalidArgument("fit_transfer_map: decoupled fit needs one channel index per state");
        for (Eigen::Index j = 0; j < n; ++j)
            if (state_channels[static_cast<std::size_t>(j)] == i) cols.push_back(j);
    } else {
        for (int t = 0; t < 2 * n_bar; ++t) cols.push_back(t * p + i);
    }
    cols.push_back(width - p + i);
    return cols;
}

}  // namespace

TransferMap fit_transfer_map(const MatrixXd& W, const Signal& u_learned, TransferVariant variant,
                             const VectorRelativeDegree& vrd, int n_bar, const FitOptions& options) {
    const auto p = u_learned.rows();
    check_vrd(vrd, p, "fit_transfer_map");
    if (u_learned.cols() < W.rows()) throw DimensionError("fit_transfer_map: fewer inputs than regressor rows");
    if (variant == TransferVariant::io) {
        if (n_bar < 1) throw InvalidArgument("fit_transfer_map: io variant needs n_bar >= 1");
        if (W.cols() != 2 * n_bar * p + p) throw DimensionError("fit_transfer_map: io regressor has wrong width");
    } else if (W.cols() <= p) {
        throw DimensionError("fit_transfer_map: state regressor has wrong width");
    }
    TransferMap map;
    map.variant = variant;
    map.vrd = vrd;
    map.n_bar = variant == TransferVariant::io ? n_bar : 0;
    map.structure = options.structure;
    const MatrixXd targets = u_learned.leftCols(W.rows()).transpose();
    if (options.structure == FitStructure::full) {
        map.theta = solve_least_squares(W, targets, options, &map.diagnostics);
        return map;
    }
    map.theta = MatrixXd::Zero(W.cols(), p);
    double residual_sq = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        const auto cols = channel_columns(variant, W.cols(), p, n_bar, options.state_channels, i);
        MatrixXd Wi(W.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) Wi.col(static_cast<Eigen::Index>(c)) = W.col(cols[c]);
        TransferDiagnostics d;
        const MatrixXd th = solve_least_squares(Wi, targets.col(i), options, &d);
        for (std::size_t c = 0; c < cols.size(); ++c) map.theta(cols[c], i) = th(static_cast<Eigen::Index>(c), 0);
        residual_sq += d.residual_norm * d.residual_norm;
        map.diagnostics.rank += d.rank;
        map.diagnostics.rank_deficient = map.diagnostics.rank_deficient || d.rank_deficient;
        map.diagnostics.condition_number = std::max(map.diagnostics.condition_number, d.condition_number);
    }
    map.diagnostics.residual_norm = std::sqrt(residual_sq);
    return map;
}

ModelFeedback::ModelFeedback(StateSpaceModel model)
    : ModelFeedback(model, VectorXd::Zero(model.states())) {}

ModelFeedback::ModelFeedback(StateSpaceModel model, VectorXd x0) : model_(std::move(model)) {
    if (x0.size() != model_.states()) throw DimensionError("ModelFeedback: x0 has wrong length");
    x_.push_back(std::move(x0));
}

std::optional<VectorXd> ModelFeedback::state(std::size_t k) {
    if (k >= x_.size()) return std::nullopt;
    return x_[k];
}

std::optional<VectorXd> ModelFeedback::output(std::size_t k) {
    if (k >= x_.size()) return std::nullopt;
    return VectorXd(model_.C() * x_[k]);
}

void ModelFeedback::apply(std::size_t k, const VectorXd& u) {
    if (k + 1 != x_.size()) throw InvalidArgument("ModelFeedback: inputs must be applied in order");
    if (u.size() != model_.channels()) throw DimensionError("ModelFeedback: input has wrong length");
    x_.push_back(model_.A() * x_.back() + model_.B() * u);
}

MatrixXd ModelFeedback::states() const {
    MatrixXd X(model_.states(), static_cast<Eigen::Index>(x_.size()));
    for (std::size_t k = 0; k < x_.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = x_[k];
    return X;
}

RecordedFeedback::RecordedFeedback(MatrixXd states, Signal outputs)
    : x_(std::move(states)), y_(std::move(outputs)) {}

std::optional<VectorXd> RecordedFeedback::state(std::size_t k) {
    if (static_cast<Eigen::Index>(k) >= x_.cols()) return std::nullopt;
    return VectorXd(x_.col(static_cast<Eigen::Index>(k)));
}

std::optional<VectorXd> RecordedFeedback::output(std::size_t k) {
    if (static_cast<Eigen::Index>(k) >= y_.cols()) return std::nullopt;
    return VectorXd(y_.col(static_cast<Eigen::Index>(k)));
}

Signal apply_transfer_map_online(const TransferMap& map, const Signal& y_desired,
                                 TransferFeedback& feedback, Eigen::Index samples) {
    const auto p = map.channels();
    check_vrd(map.vrd, p, "apply_transfer_map_online");
    if (y_desired.rows() != p) throw DimensionError("apply_transfer_map_online: y_desired has wrong channel count");
    if (samples < 0) throw InvalidArgument("apply_transfer_map_online: samples must be >= 0");
    if (y_desired.cols() < samples + map.vrd.max())
        throw DimensionError("apply_transfer_map_online: y_desired too short for the requested samples");
    if (!map.theta.allFinite()) throw InvalidArgument("apply_transfer_map_online: theta is not finite");

    Signal u(p, samples);
    VectorXd row(map.theta.rows());
    const Eigen::Index hist = map.history_width();
    std::vector<VectorXd> y_hist;  // y(0..k-1)

    for (Eigen::Index k = 0; k < samples; ++k) {
        const auto step = static_cast<std::size_t>(k);
        if (map.variant == TransferVariant::state) {
            auto x = feedback.state(step);
            if (!x) throw MissingFeedback("apply_transfer_map_online: no state at step " + std::to_string(k), step);
            if (x->size() != hist) throw DimensionError("apply_transfer_map_online: state has wrong length");
            row.head(hist) = *x;
        } else {
            if (k > 0) {
                auto y = feedback.output(step - 1);
                if (!y)
                    throw MissingFeedback("apply_transfer_map_online: no output at step " + std::to_string(k - 1),
                                          step - 1);
                if (y->size() != p) throw DimensionError("apply_transfer_map_online: output has wrong length");
                y_hist.push_back(std::move(*y));
            }
            row.head(2 * hist).setZero();
            for (int i = 0; i < map.n_bar; ++i) {
                const Eigen::Index j = k - map.n_bar + i;
                if (j < 0) continue;
                row.segment(i * p, p) = u.col(j);
                row.segment(hist + i * p, p) = y_hist[static_cast<std::size_t>(j)];
            }
        }
        row.tail(p) = shifted_desired(y_desired, map.vrd, k);
        u.col(k) = map.theta.transpose() * row;
        feedback.apply(step, u.col(k));
    }
    return u;
}

Signal predict_inputs(const TransferMap& map, const MatrixXd& W) {
    if (W.cols() != map.theta.rows()) throw DimensionError("predict_inputs: regressor width mismatch");
    return (W * map.theta).transpose();
}

VectorXd StateReconstructor::reconstruct(const VectorXd& u_window, const VectorXd& y_window) const {
    if (u_window.size() != M_u.cols() || y_window.size() != M_y.cols())
        throw DimensionError("StateReconstructor: window length mismatch");
    return M_u * u_window + M_y * y_window;
}

StateReconstructor state_reconstructor(const StateSpaceModel& model, int n_bar) {
    if (n_bar < 1) throw InvalidArgument("state_reconstructor: n_bar must be >= 1");
    const auto n = model.states();
    const auto p = model.channels();
    const auto& A = model.A();
    const auto& B = model.B();
    const auto& C = model.C();
    const Eigen::Index w = n_bar * p;

    std::vector<MatrixXd> Apow(static_cast<std::size_t>(n_bar) + 1);
    Apow[0] = MatrixXd::Identity(n, n);
    for (int i = 1; i <= n_bar; ++i) Apow[static_cast<std::size_t>(i)] = A * Apow[static_cast<std::size_t>(i) - 1];

    MatrixXd V(w, n), T = MatrixXd::Zero(w, w), U(n, w);
    for (int i = 0; i < n_bar; ++i) {
        V.middleRows(i * p, p) = C * Apow[static_cast<std::size_t>(i)];
        U.middleCols(i * p, p) = Apow[static_cast<std::size_t>(n_bar - 1 - i)] * B;
        for (int l = 0; l < i; ++l)
            T.block(i * p, l * p, p, p) = C * Apow[static_cast<std::size_t>(i - 1 - l)] * B;
    }

    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(V);
    if (cod.rank() < n) {
        std::ostringstream msg;
        msg << "state_reconstructor: observability matrix has rank " << cod.rank() << " < " << n
            << " for n_bar = " << n_bar;
        throw UnobservableError(msg.str());
    }
    StateReconstructor rec;
    rec.n_bar = n_bar;
    rec.M_y = Apow[static_cast<std::size_t>(n_bar)] * cod.pseudoInverse();
    rec.M_u = U - rec.M_y * T;
    return rec;
}

Signal map_between_reference_models(const Signal& u_learned, const StateSpaceModel& ref_source,
                                    const StateSpaceModel& ref_target) {
    const auto p = ref_target.channels();
    if (ref_source.channels() != p || u_learned.rows() != p)
        throw DimensionError("map_between_reference_models: channel count mismatch");
    const auto N = u_learned.cols();
    const auto vrd = vector_relative_degree(ref_target);
    const auto realized = simulate(ref_source, u_learned);
    Signal y(p, N + 1);
    y.col(0).setZero();  // source starts at rest
    y.rightCols(N) = realized.y;
    return perfect_tracking_input(ref_target, vrd, hold_extend(y, vrd.max() - 1)).u;
}

namespace {

const char* variant_name(TransferVariant v) { return v == TransferVariant::state ? "state" : "io"; }

}  // namespace

std::string transfer_map_to_json(const TransferMap& map) {
    json j;
    j["variant"] = variant_name(map.variant);
    j["r"] = map.vrd.r;
    j["A0"] = detail::matrix_to_json(map.vrd.A0);
    j["n_bar"] = map.n_bar;
    j["structure"] = map.structure == FitStructure::full ? "full" : "decoupled";
    j["theta"] = detail::matrix_to_json(map.theta);
    j["alignment"] = "row a predicts u(a), a = 0..N - max(r)";
    j["diagnostics"] = {{"residual_norm", map.diagnostics.residual_norm},
                        {"condition_number", std::isfinite(map.diagnostics.condition_number)
                                                 ? json(map.diagnostics.condition_number)
                                                 : json(nullptr)},
                        {"rank", map.diagnostics.rank},
                        {"rank_deficient", map.diagnostics.rank_deficient}};
    return j.dump(2);
}

TransferMap transfer_map_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("transfer_map_from_json: ") + e.what());
    }
    try {
        TransferMap map;
        const auto variant = j.at("variant").get<std::string>();
        if (variant == "state") map.variant = TransferVariant::state;
        else if (variant == "io") map.variant = TransferVariant::io;
        else throw InvalidArgument("transfer_map_from_json: unknown variant " + variant);
        map.vrd.r = j.at("r").get<std::vector<int>>();
        map.vrd.A0 = detail::matrix_from_json<InvalidArgument>(j.at("A0"), "A0");
        map.n_bar = j.at("n_bar").get<int>();
        const auto structure = j.value("structure", std::string("full"));
        if (structure == "full") map.structure = FitStructure::full;
        else if (structure == "decoupled") map.structure = FitStructure::decoupled;
        else throw InvalidArgument("transfer_map_from_json: unknown structure " + structure);
        map.theta = detail::matrix_from_json<InvalidArgument>(j.at("theta"), "theta");
        if (j.contains("diagnostics")) {
            const auto& d = j["diagnostics"];
            map.diagnostics.residual_norm = d.value("residual_norm", 0.0);
            map.diagnostics.condition_number = d.contains("condition_number") && d["condition_number"].is_number()
                                                   ? d["condition_number"].get<double>()
                                                   : std::numeric_limits<double>::infinity();
            map.diagnostics.rank = d.value("rank", 0);
            map.diagnostics.rank_deficient = d.value("rank_deficient", false);
        }
        check_vrd(map.vrd, map.theta.cols(), "transfer_map_from_json");
        if (!map.theta.allFinite()) throw InvalidArgument("transfer_map_from_json: theta is not finite");
        const auto p = map.theta.cols();
        if (map.variant == TransferVariant::io && map.theta.rows() != 2 * map.n_bar * p + p)
            throw InvalidArgument("transfer_map_from_json: theta length inconsistent with n_bar");
        return map;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("transfer_map_from_json: ") + e.what());
    }
}

}  // namespace xfer
