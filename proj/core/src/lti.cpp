#include "xfer/lti.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xfer/continuous.hpp"
#include "xfer/error.hpp"

namespace xfer {

namespace {

constexpr double kRankThreshold = 1e-12;

Eigen::Index rank_of(const MatrixXd& M) {
    Eigen::FullPivLU<MatrixXd> lu(M);
    lu.setThreshold(kRankThreshold);
    return lu.rank();
}

bool is_singular(const MatrixXd& M, double tol) {
    if (M.size() == 0) return true;
    Eigen::JacobiSVD<MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    return !(smax > 0.0) || smin <= std::max(tol, kRankThreshold) * smax;
}

std::vector<std::string> default_labels(Eigen::Index p, const char* prefix) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

}  // namespace

VectorXd lift(const Signal& s) {
    return Eigen::Map<const VectorXd>(s.data(), s.size());
}

Signal unlift(const VectorXd& v, Eigen::Index channels) {
    if (channels <= 0 || v.size() % channels != 0)
        throw DimensionError("unlift: vector length not divisible by channel count");
    return Eigen::Map<const MatrixXd>(v.data(), channels, v.size() / channels);
}

StateSpaceModel::StateSpaceModel(MatrixXd A, MatrixXd B, MatrixXd C, double dt,
                                 std::vector<std::string> input_labels,
                                 std::vector<std::string> output_labels)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), dt_(dt),
      input_labels_(std::move(input_labels)), output_labels_(std::move(output_labels)) {
    const auto n = A_.rows();
    const auto p = B_.cols();
    if (A_.cols() != n || n == 0) throw DimensionError("StateSpaceModel: A must be square and non-empty");
    if (B_.rows() != n) throw DimensionError("StateSpaceModel: B must have n rows");
    if (C_.cols() != n || C_.rows() != p)
        throw DimensionError("StateSpaceModel: C must be p x n (square system)");
    if (p == 0 || n < p) throw DimensionError("StateSpaceModel: requires n >= p >= 1");
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InvalidArgument("StateSpaceModel: dt must be > 0");
    if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite())
        throw InvalidArgument("StateSpaceModel: non-finite matrix entry");
    if (rank_of(B_) != p) throw InvalidArgument("StateSpaceModel: B must have full column rank");
    if (rank_of(C_) != p) throw InvalidArgument("StateSpaceModel: C must have full row rank");
    if (input_labels_.empty()) input_labels_ = default_labels(p, "u");
    if (output_labels_.empty()) output_labels_ = default_labels(p, "y");
    if (static_cast<Eigen::Index>(input_labels_.size()) != p ||
        static_cast<Eigen::Index>(output_labels_.size()) != p)
        throw DimensionError("StateSpaceModel: label count must equal channel count");
}

StateSpaceModel StateSpaceModel::transformed(const MatrixXd& T) const {
    if (T.rows() != states() || T.cols() != states())
        throw DimensionError("transformed: T must be n x n");
    Eigen::PartialPivLU<MatrixXd> lu(T);
    const MatrixXd Tinv = lu.inverse();
    return StateSpaceModel(T * A_ * Tinv, T * B_, C_ * Tinv, dt_, input_labels_, output_labels_);
}

SimulationResult simulate(const StateSpaceModel& model, const Signal& u, const VectorXd& x0) {
    if (u.rows() != model.channels())
        throw DimensionError("simulate: input rows must equal channel count");
    if (x0.size() != model.states())
        throw DimensionError("simulate: x0 must have n entries");
    const auto N = u.cols();
    SimulationResult out;
    out.x.resize(model.states(), N + 1);
    out.y.resize(model.channels(), N);
    out.x.col(0) = x0;
    for (Eigen::Index k = 0; k < N; ++k) {
        out.x.col(k + 1).noalias() = model.A() * out.x.col(k);
        out.x.col(k + 1).noalias() += model.B() * u.col(k);
        out.y.col(k).noalias() = model.C() * out.x.col(k + 1);
    }
    return out;
}

SimulationResult simulate(const StateSpaceModel& model, const Signal& u) {
    return simulate(model, u, VectorXd::Zero(model.states()));
}

int VectorRelativeDegree::total() const { return std::accumulate(r.begin(), r.end(), 0); }

int VectorRelativeDegree::max() const {
    return r.empty() ? 0 : *std::max_element(r.begin(), r.end());
}

VectorRelativeDegree vector_relative_degree(const StateSpaceModel& model, double tol) {
    if (tol < 0.0) throw InvalidArgument("vector_relative_degree: tol must be >= 0");
    const auto n = model.states();
    const auto p = model.channels();
    const double nA = model.A().norm();
    const double nB = model.B().norm();
    const double nC = model.C().norm();

    VectorRelativeDegree vrd;
    vrd.r.assign(static_cast<std::size_t>(p), 0);
    vrd.A0 = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::RowVectorXd ci_ak = model.C().row(i);
        double scale = nC * nB;
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::RowVectorXd markov = ci_ak * model.B();
            if (markov.cwiseAbs().maxCoeff() > tol * scale) {
                vrd.r[static_cast<std::size_t>(i)] = static_cast<int>(k + 1);
                vrd.A0.row(i) = markov;
                break;
            }
            ci_ak = ci_ak * model.A();
            scale *= nA;
        }
        if (vrd.r[static_cast<std::size_t>(i)] == 0) {
            std::ostringstream msg;
            msg << "vector_relative_degree: output " << i << " is not affected by any input";
            throw UndefinedRelativeDegree(msg.str());
        }
    }
    if (vrd.total() > n || is_singular(vrd.A0, tol))
        throw UndefinedRelativeDegree("vector_relative_degree: decoupling matrix A0 is singular");
    return vrd;
}

std::vector<StepExperimentRecord> step_experiments(const StateSpaceModel& model, int samples,
                                                   double magnitude) {
    if (samples < 1) throw InvalidArgument("step_experiments: samples must be >= 1");
    const auto p = model.channels();
    std::vector<StepExperimentRecord> records;
    for (Eigen::Index j = 0; j < p; ++j) {
        Signal u = Signal::Zero(p, samples);
        u.row(j).setConstant(magnitude);
        const auto sim = simulate(model, u);
        StepExperimentRecord rec;
        rec.input_channel = static_cast<int>(j);
        rec.magnitude = magnitude;
        rec.dt = model.dt();
        rec.y.resize(p, samples + 1);
        rec.y.col(0) = model.C() * sim.x.col(0);
        rec.y.rightCols(samples) = sim.y;
        records.push_back(std::move(rec));
    }
    return records;
}

StepRelativeDegreeEstimate estimate_relative_degree_from_steps(
    const std::vector<StepExperimentRecord>& records, double tol) {
    const auto p = static_cast<Eigen::Index>(records.size());
    if (p == 0) throw InvalidArgument("estimate_relative_degree_from_steps: no records");
    std::vector<const StepExperimentRecord*> by_channel(records.size(), nullptr);
    double peak = 0.0;
    for (const auto& rec : records) {
        if (rec.input_channel < 0 || rec.input_channel >= p ||
            by_channel[static_cast<std::size_t>(rec.input_channel)] != nullptr)
            throw InvalidArgument("estimate_relative_degree_from_steps: need one record per input channel");
        if (rec.y.rows() != p || rec.y.cols() < 2)
            throw DimensionError("estimate_relative_degree_from_steps: record output has wrong shape");
        if (rec.dt != records.front().dt)
            throw InvalidArgument("estimate_relative_degree_from_steps: records must share dt");
        if (rec.magnitude == 0.0)
            throw InvalidArgument("estimate_relative_degree_from_steps: zero step magnitude");
        by_channel[static_cast<std::size_t>(rec.input_channel)] = &rec;
        peak = std::max(peak, rec.y.cwiseAbs().maxCoeff());
    }
    const double threshold = tol * std::max(peak, 1.0);

    StepRelativeDegreeEstimate est;
    est.vrd.r.assign(static_cast<std::size_t>(p), 0);
    est.Y_r = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        int best = 0;
        for (const auto* rec : by_channel) {
            for (Eigen::Index k = 1; k < rec->y.cols(); ++k) {
                if (std::abs(rec->y(i, k)) > threshold) {
                    if (best == 0 || k < best) best = static_cast<int>(k);
                    break;
                }
            }
        }
        if (best == 0) {
            std::ostringstream msg;
            msg << "estimate_relative_degree_from_steps: output " << i
                << " never responds within the record length";
            throw UndetectableDegree(msg.str(), static_cast<int>(i));
        }
        est.vrd.r[static_cast<std::size_t>(i)] = best;
        for (Eigen::Index j = 0; j < p; ++j) est.Y_r(i, j) = by_channel[static_cast<std::size_t>(j)]->y(i, best);
    }
    est.vrd.A0 = est.Y_r;
    for (Eigen::Index j = 0; j < p; ++j)
        est.vrd.A0.col(j) /= by_channel[static_cast<std::size_t>(j)]->magnitude;
    est.full_rank = !is_singular(est.Y_r, tol);
    return est;
}

VectorXd LiftedModel::apply(const VectorXd& u) const {
    if (u.size() != F.cols()) throw DimensionError("LiftedModel::apply: length mismatch");
    return F * u;
}

LiftedModel lifted_representation(const StateSpaceModel& model, int N) {
    if (N < 1) throw InvalidArgument("lifted_representation: N must be >= 1");
    const auto p = model.channels();
    std::vector<MatrixXd> markov;
    markov.reserve(static_cast<std::size_t>(N));
    MatrixXd ak_b = model.B();
    for (int k = 0; k < N; ++k) {
        markov.push_back(model.C() * ak_b);
        ak_b = model.A() * ak_b;
    }
    LiftedModel lm;
    lm.N = N;
    lm.p = static_cast<int>(p);
    lm.dt = model.dt();
    lm.F = MatrixXd::Zero(N * p, N * p);
    for (int row = 0; row < N; ++row)
        for (int col = 0; col <= row; ++col)
            lm.F.block(row * p, col * p, p, p) = markov[static_cast<std::size_t>(row - col)];
    return lm;
}

MatrixXd relative_degree_rows(const StateSpaceModel& model, const VectorRelativeDegree& vrd) {
    const auto p = model.channels();
    if (static_cast<Eigen::Index>(vrd.r.size()) != p)
        throw DimensionError("relative_degree_rows: r has wrong length");
    MatrixXd rows(p, model.states());
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::RowVectorXd v = model.C().row(i);
        for (int k = 0; k < vrd.r[static_cast<std::size_t>(i)]; ++k) v = v * model.A();
        rows.row(i) = v;
    }
    return rows;
}

MinimumPhaseReport minimum_phase_check(const StateSpaceModel& model,
                                       const VectorRelativeDegree& vrd, double tol) {
    const auto p = model.channels();
    if (vrd.A0.rows() != p || vrd.A0.cols() != p)
        throw DimensionError("minimum_phase_check: A0 has wrong shape");
    if (is_singular(vrd.A0, 0.0))
        throw UndefinedRelativeDegree("minimum_phase_check: decoupling matrix A0 is singular");

    MinimumPhaseReport rep;
    const MatrixXd feedback = vrd.A0.partialPivLu().solve(relative_degree_rows(model, vrd));
    rep.closed_loop = model.A() - model.B() * feedback;
    Eigen::EigenSolver<MatrixXd> es(rep.closed_loop, false);
    const auto& ev = es.eigenvalues();
    rep.spectrum.assign(ev.data(), ev.data() + ev.size());
    std::stable_sort(rep.spectrum.begin(), rep.spectrum.end(),
                     [](const auto& a, const auto& b) { return std::abs(a) < std::abs(b); });
    const auto structural = std::min<std::size_t>(static_cast<std::size_t>(vrd.total()), rep.spectrum.size());
    rep.zero_dynamics.assign(rep.spectrum.begin() + static_cast<std::ptrdiff_t>(structural), rep.spectrum.end());
    rep.minimum_phase = std::all_of(rep.zero_dynamics.begin(), rep.zero_dynamics.end(),
                                    [tol](const auto& z) { return std::abs(z) < 1.0 - tol; });
    return rep;
}

StateSpaceModel discretize_reference(const VectorXd& K, const VectorXd& m, double dt) {
    const auto p = K.size();
    if (p == 0 || m.size() != p) throw DimensionError("discretize_reference: K and m must match");
    if (!(dt > 0.0)) throw InvalidArgument("discretize_reference: dt must be > 0");
    if ((K.array() <= 0.0).any() || (m.array() <= 0.0).any() || !K.allFinite() || !m.allFinite())
        throw InvalidArgument("discretize_reference: gains and poles must be positive");

    MatrixXd Ac = MatrixXd::Zero(2 * p, 2 * p);
    MatrixXd Bc = MatrixXd::Zero(2 * p, p);
    MatrixXd C = MatrixXd::Zero(p, 2 * p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double km = K(i) * m(i);
        Ac(2 * i, 2 * i + 1) = 1.0;
        Ac(2 * i + 1, 2 * i) = -km;
        Ac(2 * i + 1, 2 * i + 1) = -m(i);
        Bc(2 * i + 1, i) = km;
        C(i, 2 * i) = 1.0;
    }
    const auto d = zoh(Ac, Bc, dt);
    std::vector<std::string> in, out;
    static const char* axes[] = {"x", "y", "z"};
    for (Eigen::Index i = 0; i < p; ++i) {
        const std::string name = p == 3 ? axes[i] : "axis" + std::to_string(i);
        in.push_back(name + "_cmd");
        out.push_back(name);
    }
    return StateSpaceModel(d.A, d.B, C, dt, in, out);
}

double spectral_radius(const MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    Eigen::EigenSolver<MatrixXd> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace xfer
