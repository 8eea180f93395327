#include "xfer/l1_adaptive.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "xfer/error.hpp"

namespace xfer {

L1Config L1Config::defaults(Eigen::Index axes) {
    L1Config cfg;
    cfg.m = VectorXd::Constant(axes, 5.0);
    cfg.omega = VectorXd::Constant(axes, 15.0);
    cfg.kp = VectorXd::Constant(axes, 2.0);
    return cfg;
}

void L1Config::validate() const {
    const auto p = m.size();
    if (p == 0 || omega.size() != p || kp.size() != p)
        throw InvalidArgument("L1Config: m, omega and kp must have one entry per axis");
    auto positive = [](const VectorXd& v) { return v.allFinite() && (v.array() > 0.0).all(); };
    if (!positive(m) || !positive(omega) || !positive(kp))
        throw InvalidArgument("L1Config: m, omega and kp must be positive");
    for (double v : {gamma, sigma_max, eps_proj, dt_ctrl})
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidArgument("L1Config: gamma, sigma_max, eps_proj and dt_ctrl must be positive");
    if (lipschitz < 0.0 || !std::isfinite(lipschitz))
        throw InvalidArgument("L1Config: lipschitz must be >= 0");
    if (!std::isfinite(dt_ctrl * gamma)) throw InvalidArgument("L1Config: dt_ctrl * gamma must be finite");
}

double projection_bound(const VectorXd& lambda, double lambda_max, double eps) {
    const double lm2 = lambda_max * lambda_max;
    return ((eps + 1.0) * lambda.squaredNorm() - lm2) / (eps * lm2);
}

VectorXd projection(const VectorXd& lambda, const VectorXd& y, double lambda_max, double eps) {
    if (!(lambda_max > 0.0) || !(eps > 0.0))
        throw InvalidArgument("projection: lambda_max and eps must be positive");
    if (lambda.size() != y.size()) throw DimensionError("projection: size mismatch");
    const double f = projection_bound(lambda, lambda_max, eps);
    if (f < 0.0) return y;
    const VectorXd grad = (2.0 * (eps + 1.0) / (eps * lambda_max * lambda_max)) * lambda;
    const double slope = grad.dot(y);
    if (slope <= 0.0) return y;
    const double g2 = grad.squaredNorm();
    assert(g2 > 0.0 && "f >= 0 implies lambda != 0");
    return y - grad * (slope / g2 * f);
}

L1State L1State::zero(Eigen::Index axes) {
    return {VectorXd::Zero(axes), VectorXd::Zero(axes), VectorXd::Zero(axes), VectorXd::Zero(axes)};
}

L1StepResult l1_step(const L1State& state, const L1Config& cfg, const VectorXd& u2,
                     const VectorXd& y1, const VectorXd& y2) {
    const auto p = cfg.axes();
    if (u2.size() != p || y1.size() != p || y2.size() != p || state.sigma_hat.size() != p)
        throw DimensionError("l1_step: signal sizes must match the axis count");
    if (!u2.allFinite() || !y1.allFinite() || !y2.allFinite())
        throw ControllerFault("l1_step: non-finite measurement or reference");

    L1StepResult out{VectorXd(), state};
    L1State& s = out.state;
    const double dt = cfg.dt_ctrl;

    const VectorXd ytilde = s.yhat1 - y1;
    VectorXd lam(1), dir(1);
    for (Eigen::Index i = 0; i < p; ++i) {
        lam(0) = s.sigma_hat(i);
        dir(0) = -ytilde(i);
        s.sigma_hat(i) += dt * cfg.gamma * projection(lam, dir, cfg.sigma_max, cfg.eps_proj)(0);
        // A finite Euler step can leave the f <= 1 set, where (1 - f) changes
        // sign; pull the estimate back onto its surface.
        s.sigma_hat(i) = std::clamp(s.sigma_hat(i), -cfg.sigma_max, cfg.sigma_max);
    }

    const VectorXd u1 = cfg.kp.cwiseProduct(u2 - y2);
    const VectorXd av = (-cfg.omega * dt).array().exp().matrix();
    s.v_state = av.cwiseProduct(s.v_state) + (VectorXd::Ones(p) - av).cwiseProduct(u1 - s.sigma_hat);
    s.u_l1 = s.v_state;

    const VectorXd am = (-cfg.m * dt).array().exp().matrix();
    s.yhat1 = am.cwiseProduct(s.yhat1) + (VectorXd::Ones(p) - am).cwiseProduct(s.u_l1 + s.sigma_hat);

    out.u_l1 = s.u_l1;
    return out;
}

ContinuousModel l1_condition_system(const ContinuousModel& plant, const L1Config& cfg) {
    cfg.validate();
    plant.validate();
    const auto p = cfg.axes();
    if (plant.inputs() != p || plant.outputs() != p)
        throw DimensionError("verify_l1_norm_condition: plant estimate must be p x p");

    const auto I = ContinuousModel::identity(p);
    const auto V = ContinuousModel::first_order_lag(cfg.omega);
    // V M^-1 = diag(w/m (s + m)/(s + w)), biproper.
    ContinuousModel v_minv;
    v_minv.A = MatrixXd((-cfg.omega).asDiagonal());
    v_minv.B = MatrixXd::Identity(p, p);
    v_minv.C = MatrixXd(cfg.omega.cwiseProduct(cfg.m - cfg.omega).cwiseQuotient(cfg.m).asDiagonal());
    v_minv.D = MatrixXd(cfg.omega.cwiseQuotient(cfg.m).asDiagonal());

    const auto one_minus_v = difference(I, V);
    const auto inner = sum(one_minus_v, series(plant, v_minv));
    const auto H = series(inverse(inner), plant);
    const auto hvk = series(series(ContinuousModel::gain(MatrixXd(cfg.kp.asDiagonal())), V), H);

    // F = (s I + HVK)^-1 realized directly: f' = u - HVK f.
    const auto ny = hvk.states();
    ContinuousModel F;
    F.A = MatrixXd::Zero(p + ny, p + ny);
    F.A.topLeftCorner(p, p) = -hvk.D;
    F.A.topRightCorner(p, ny) = -hvk.C;
    F.A.bottomLeftCorner(ny, p) = hvk.B;
    F.A.bottomRightCorner(ny, ny) = hvk.A;
    F.B = MatrixXd::Zero(p + ny, p);
    F.B.topRows(p).setIdentity();
    F.C = MatrixXd::Zero(p, p + ny);
    F.C.leftCols(p).setIdentity();
    F.D = MatrixXd::Zero(p, p);

    return series(series(one_minus_v, H), F);
}

L1NormReport verify_l1_norm_condition(const ContinuousModel& plant_estimate, const L1Config& cfg,
                                      double horizon_s) {
    if (!(horizon_s > 0.0)) throw InvalidArgument("verify_l1_norm_condition: horizon must be > 0");
    const auto G = l1_condition_system(plant_estimate, cfg);
    L1NormReport rep;

    Eigen::EigenSolver<MatrixXd> es(G.A, false);
    rep.spectrum.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    double max_real = -std::numeric_limits<double>::infinity();
    for (const auto& z : rep.spectrum) max_real = std::max(max_real, z.real());
    rep.stable = rep.spectrum.empty() || max_real < -1e-9;
    if (!rep.stable) {
        rep.norm = std::numeric_limits<double>::infinity();
        rep.bound = rep.norm;
        rep.tail = rep.norm;
        return rep;
    }

    constexpr int kSteps = 100000;
    const double dt = horizon_s / kSteps;
    const auto d = zoh(G.A, G.B, dt);
    const auto p = G.outputs();
    // Row-wise absolute impulse sums; the induced L-infinity gain of a MIMO
    // system is the largest row sum.
    MatrixXd abs_sum = G.D.cwiseAbs();
    MatrixXd state = d.B;
    for (int k = 0; k < kSteps; ++k) {
        abs_sum += (G.C * state).cwiseAbs();
        state = d.A * state;
    }
    double norm = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) norm = std::max(norm, abs_sum.row(i).sum());

    // Tail certificate: once |A^m| <= 1/2, sum_{k >= K} |C A^k x| is at most
    // 2 m |C| max_{i < m} |A^i x| with x the state left at the horizon.
    const double rho = spectral_radius(d.A);
    rep.tail = std::numeric_limits<double>::infinity();
    if (rho < 1.0) {
        MatrixXd Am = d.A;
        long m = 1;
        while (Am.operatorNorm() > 0.5 && m < (1L << 26)) {
            Am = Am * Am;
            m *= 2;
        }
        if (Am.operatorNorm() <= 0.5) {
            double peak = 0.0;
            MatrixXd x = state;
            for (long i = 0; i < m; ++i) {
                peak = std::max(peak, x.norm());
                x = d.A * x;
            }
            rep.tail = 2.0 * static_cast<double>(m) * G.C.operatorNorm() * peak;
        }
    }
    rep.norm = norm;
    rep.bound = norm * cfg.lipschitz;
    const bool tail_ok = rep.tail <= 1e-6 + 1e-3 * norm;
    rep.satisfied = tail_ok && rep.bound < 1.0;
    return rep;
}

}  // namespace xfer
