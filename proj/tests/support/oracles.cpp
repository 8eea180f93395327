#include "oracles.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <fftw3.h>

namespace oracle {

MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    MatrixXd M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = n(rng);
    return M;
}

namespace {

double radius(const MatrixXd& A) { return A.eigenvalues().cwiseAbs().maxCoeff(); }

MatrixXd well_conditioned(Rng& rng, int n) {
    Eigen::HouseholderQR<MatrixXd> qr(gaussian(rng, n, n));
    std::uniform_real_distribution<double> s(0.5, 2.0);
    VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = s(rng);
    return MatrixXd(qr.householderQ()) * d.asDiagonal();
}

}  // namespace

xfer::StateSpaceModel random_stable(Rng& rng, int n, int p, double dt) {
    std::uniform_real_distribution<double> target(0.5, 0.95);
    for (;;) {
        MatrixXd A = gaussian(rng, n, n);
        const double rho = radius(A);
        if (rho < 1e-6) continue;
        A *= target(rng) / rho;
        MatrixXd B = gaussian(rng, n, p), C = gaussian(rng, p, n);
        if (Eigen::FullPivLU<MatrixXd>(B).rank() < p || Eigen::FullPivLU<MatrixXd>(C).rank() < p) continue;
        return {A, B, C, dt};
    }
}

std::vector<int> random_degrees(Rng& rng, int n, int p) {
    std::bernoulli_distribution two(0.5);
    std::vector<int> r(static_cast<std::size_t>(p), 1);
    int total = p;
    for (auto& ri : r)
        if (total < n && two(rng)) {
            ri = 2;
            ++total;
        }
    return r;
}

xfer::StateSpaceModel random_minimum_phase(Rng& rng, int n, const std::vector<int>& r, double dt) {
    const int p = static_cast<int>(r.size());
    int rsum = 0;
    for (int ri : r) rsum += ri;
    const int nz = n - rsum;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (;;) {
        // Coordinates: chains xi_i (r_i states each, first one is y_i), then eta.
        MatrixXd A = MatrixXd::Zero(n, n), B = MatrixXd::Zero(n, p), C = MatrixXd::Zero(p, n);
        MatrixXd A0 = gaussian(rng, p, p);
        if (std::abs(A0.determinant()) < 0.1) continue;
        int row = 0;
        for (int i = 0; i < p; ++i) {
            C(i, row) = 1.0;
            for (int k = 0; k + 1 < r[static_cast<std::size_t>(i)]; ++k) A(row + k, row + k + 1) = 1.0;
            const int last = row + r[static_cast<std::size_t>(i)] - 1;
            A.row(last) = 0.3 * gaussian(rng, 1, n);
            B.row(last) = A0.row(i);
            row = last + 1;
        }
        if (nz > 0) {
            MatrixXd Az = gaussian(rng, nz, nz);
            const double rho = radius(Az);
            if (rho > 1e-9) Az *= 0.8 * (0.5 + 0.5 * (unit(rng) + 1.0) / 2.0) / rho;
            A.block(rsum, rsum, nz, nz) = Az;
            A.block(rsum, 0, nz, rsum) = 0.3 * gaussian(rng, nz, rsum);
        }
        if (radius(A) >= 0.98) continue;
        const MatrixXd T = well_conditioned(rng, n);
        const MatrixXd Ti = T.inverse();
        return {T * A * Ti, T * B, C * Ti, dt};
    }
}

Eigen::MatrixXd smooth_trajectory(Rng& rng, int p, int samples, double dt, int components, double max_freq) {
    std::uniform_real_distribution<double> freq(0.05, max_freq), phase(0.0, 2.0 * std::numbers::pi), amp(0.2, 1.0);
    MatrixXd Y(p, samples);
    const auto c = static_cast<std::size_t>(components);
    for (int i = 0; i < p; ++i) {
        std::vector<double> f(c), ph(c), a(c);
        for (std::size_t m = 0; m < c; ++m) {
            f[m] = freq(rng);
            ph[m] = phase(rng);
            a[m] = amp(rng);
        }
        for (int k = 0; k < samples; ++k) {
            const double t = k * dt;
            double v = 0.0;
            for (std::size_t m = 0; m < c; ++m) v += a[m] * std::sin(2.0 * std::numbers::pi * f[m] * t + ph[m]);
            Y(i, k) = v;
        }
    }
    return Y;
}

VectorXd box_qp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo, const VectorXd& hi, double tol,
                int max_iterations) {
    const double L = Eigen::SelfAdjointEigenSolver<MatrixXd>(H).eigenvalues().maxCoeff();
    auto project = [&](const VectorXd& v) { return v.cwiseMax(lo).cwiseMin(hi); };
    VectorXd x = project(VectorXd::Zero(g.size())), y = x;
    double t = 1.0;
    for (int it = 0; it < max_iterations; ++it) {
        const VectorXd next = project(y - (H * y + g) / L);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t_next) * (next - x);
        const double step = (next - x).norm();
        x = next;
        t = t_next;
        // Restart the momentum whenever it stops helping.
        if ((H * x + g).dot(y - x) > 0.0) {
            y = x;
            t = 1.0;
        }
        if (step < tol * (1.0 + x.norm())) break;
    }
    return x;
}

std::vector<MatrixXd> markov(const xfer::StateSpaceModel& m, int count) {
    std::vector<MatrixXd> out;
    MatrixXd AkB = m.B();
    for (int k = 0; k < count; ++k) {
        out.push_back(m.C() * AkB);
        AkB = m.A() * AkB;
    }
    return out;
}

VectorXd rk4(const MatrixXd& A, const MatrixXd& B, const std::function<VectorXd(double)>& u, const VectorXd& x0,
             double t_end, double h) {
    VectorXd x = x0;
    const auto steps = static_cast<long>(std::llround(t_end / h));
    auto f = [&](double t, const VectorXd& s) { return VectorXd(A * s + B * u(t)); };
    for (long k = 0; k < steps; ++k) {
        const double t = k * h;
        const VectorXd k1 = f(t, x);
        const VectorXd k2 = f(t + h / 2, x + h / 2 * k1);
        const VectorXd k3 = f(t + h / 2, x + h / 2 * k2);
        const VectorXd k4 = f(t + h, x + h * k3);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

double l1_norm_frequency_sampling(const xfer::ContinuousModel& g, double window_s, int samples) {
    using cd = std::complex<double>;
    const auto n = g.states();
    const auto p = g.outputs(), q = g.inputs();
    const double dt = window_s / samples;
    std::vector<fftw_complex> buf(static_cast<std::size_t>(samples));
    fftw_plan plan = fftw_plan_dft_1d(samples, buf.data(), buf.data(), FFTW_BACKWARD, FFTW_ESTIMATE);

    // Frequency response on the grid, all entries at once.
    std::vector<Eigen::MatrixXcd> resp(static_cast<std::size_t>(samples));
    const Eigen::MatrixXcd A = g.A.cast<cd>(), B = g.B.cast<cd>(), C = g.C.cast<cd>();
    for (int k = 0; k < samples; ++k) {
        const int kk = k < samples / 2 ? k : k - samples;
        const double w = 2.0 * std::numbers::pi * kk / window_s;
        const Eigen::MatrixXcd M = cd(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - A;
        resp[static_cast<std::size_t>(k)] = C * M.partialPivLu().solve(B);
    }
    VectorXd rows = VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < q; ++j) {
            for (int k = 0; k < samples; ++k) {
                const cd v = resp[static_cast<std::size_t>(k)](i, j) / window_s;
                buf[static_cast<std::size_t>(k)][0] = v.real();
                buf[static_cast<std::size_t>(k)][1] = v.imag();
            }
            fftw_execute(plan);
            double s = 0.0;
            for (int k = 0; k < samples; ++k) s += std::abs(buf[static_cast<std::size_t>(k)][0]) * dt;
            rows(i) += s;
        }
    fftw_destroy_plan(plan);
    return rows.maxCoeff();
}

}  // namespace oracle
