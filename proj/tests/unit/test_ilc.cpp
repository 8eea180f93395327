#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xfer/error.hpp"
#include "xfer/ilc.hpp"

using namespace xfer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LiftedModel random_lifted(oracle::Rng& rng, int n, int p, int N) {
    return lifted_representation(oracle::random_stable(rng, n, p), N);
}

// Lifted model with nonsingular CB, hence invertible F.
LiftedModel invertible_lifted(oracle::Rng& rng, int n, int p, int N) {
    return lifted_representation(oracle::random_minimum_phase(rng, n, std::vector<int>(static_cast<std::size_t>(p), 1)), N);
}

VectorXd closed_form(const IlcConfig& cfg, const LiftedModel& F, const VectorXd& d) {
    const auto n = F.size();
    const MatrixXd Q = cfg.Q.size() ? cfg.Q : MatrixXd(cfg.q_weight * MatrixXd::Identity(n, n));
    const MatrixXd R = cfg.R.size() ? cfg.R : MatrixXd(cfg.r_weight * MatrixXd::Identity(n, n));
    return -(F.F.transpose() * Q * F.F + R).ldlt().solve(F.F.transpose() * Q * d);
}

double min_eigenvalue(const MatrixXd& P) {
    return Eigen::SelfAdjointEigenSolver<MatrixXd>(P).eigenvalues().minCoeff();
}

IlcConstraints input_box(Eigen::Index n, double bound) {
    IlcConstraints c;
    c.Z_c.resize(2 * n, n);
    c.Z_c << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    c.u_max = VectorXd::Constant(2 * n, bound);
    c.absolute = false;
    return c;
}

}  // namespace

TEST(Kalman, TinyMeasurementNoiseTrustsMeasurement) {
    oracle::Rng rng(1);
    const auto F = random_lifted(rng, 3, 2, 10);
    IlcConfig cfg;
    cfg.kalman = {1e6, 0.0, 1e-9};
    const VectorXd u = oracle::gaussian(rng, 20, 1), y = oracle::gaussian(rng, 20, 1);
    const auto s = kalman_update(initial_ilc_state(20, cfg.kalman), cfg, F, u, y);
    EXPECT_LT((s.d_hat - (y - F.F * u)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(s.j, 1);
}

TEST(Kalman, NoiseFreeMeasurementsConvergeMonotonically) {
    oracle::Rng rng(2);
    const auto F = random_lifted(rng, 4, 2, 15);
    IlcConfig cfg;
    const VectorXd d = oracle::gaussian(rng, 30, 1);
    auto s = initial_ilc_state(30, cfg.kalman);
    double last = (s.d_hat - d).norm();
    for (int j = 0; j < 20; ++j) {
        const VectorXd u = oracle::gaussian(rng, 30, 1);
        s = kalman_update(s, cfg, F, u, F.F * u + d);
        const double err = (s.d_hat - d).norm();
        EXPECT_LT(err, last);
        last = err;
    }
    EXPECT_LT(last, 1e-3 * d.norm());
}

TEST(Kalman, ZeroInnovationKeepsEstimate) {
    oracle::Rng rng(3);
    const auto F = random_lifted(rng, 3, 1, 12);
    IlcConfig cfg;
    auto s = initial_ilc_state(12, cfg.kalman);
    s.d_hat = oracle::gaussian(rng, 12, 1);
    const VectorXd u = oracle::gaussian(rng, 12, 1);
    const auto next = kalman_update(s, cfg, F, u, F.F * u + s.d_hat);
    EXPECT_LT((next.d_hat - s.d_hat).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Kalman, CovarianceStaysSymmetricPsd) {
    oracle::Rng rng(4);
    const auto F = random_lifted(rng, 3, 2, 6);
    IlcConfig cfg;
    cfg.kalman = {0.5, 1e-3, 1e-2};
    auto iso = initial_ilc_state(12, cfg.kalman);
    auto dense = iso;
    const MatrixXd G = oracle::gaussian(rng, 12, 12);
    dense.P = Covariance::dense(G * G.transpose() + 0.1 * MatrixXd::Identity(12, 12));
    for (int j = 0; j < 30; ++j) {
        const VectorXd u = oracle::gaussian(rng, 12, 1), y = oracle::gaussian(rng, 12, 1);
        iso = kalman_update(iso, cfg, F, u, y);
        dense = kalman_update(dense, cfg, F, u, y);
        EXPECT_TRUE(iso.P.is_isotropic());
        for (const auto* s : {&iso, &dense}) {
            const MatrixXd P = s->P.to_dense();
            EXPECT_LT((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_GE(min_eigenvalue(P), -1e-10);
            EXPECT_TRUE(s->d_hat.allFinite());
        }
    }
}

TEST(Kalman, IsotropicMatchesDenseFilter) {
    oracle::Rng rng(5);
    const auto F = random_lifted(rng, 3, 2, 5);
    IlcConfig cfg;
    auto iso = initial_ilc_state(10, cfg.kalman);
    auto dense = iso;
    dense.P = Covariance::dense(cfg.kalman.p0 * MatrixXd::Identity(10, 10));
    for (int j = 0; j < 5; ++j) {
        const VectorXd u = oracle::gaussian(rng, 10, 1), y = oracle::gaussian(rng, 10, 1);
        iso = kalman_update(iso, cfg, F, u, y);
        dense = kalman_update(dense, cfg, F, u, y);
    }
    EXPECT_LT((iso.d_hat - dense.d_hat).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((iso.P.to_dense() - dense.P.to_dense()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kalman, RejectsNonPositiveMeasurementNoise) {
    oracle::Rng rng(6);
    const auto F = random_lifted(rng, 2, 1, 4);
    IlcConfig cfg;
    cfg.kalman.q_meas = 0.0;
    EXPECT_THROW(kalman_update(initial_ilc_state(4, {}), cfg, F, VectorXd::Zero(4), VectorXd::Zero(4)), InvalidArgument);
}

TEST(IlcUpdate, ZeroEstimateGivesZeroInput) {
    oracle::Rng rng(7);
    const auto F = random_lifted(rng, 3, 2, 8);
    IlcConfig cfg;
    EXPECT_EQ(ilc_update(initial_ilc_state(16, cfg.kalman), cfg, F).cwiseAbs().maxCoeff(), 0.0);
}

TEST(IlcUpdate, UnconstrainedMatchesNormalEquations) {
    oracle::Rng rng(8);
    std::uniform_int_distribution<int> pick_p(1, 3), pick_N(2, 20);
    for (int trial = 0; trial < 100; ++trial) {
        const int p = pick_p(rng);
        const int N = std::min(pick_N(rng), 60 / p);
        const auto F = random_lifted(rng, p + 2, p, N);
        const auto n = F.size();
        IlcConfig cfg;
        if (trial % 2 == 0) {
            const MatrixXd Gq = oracle::gaussian(rng, n, n / 2 + 1), Gr = oracle::gaussian(rng, n, n);
            cfg.Q = Gq * Gq.transpose();
            cfg.R = Gr * Gr.transpose() + 0.1 * MatrixXd::Identity(n, n);
        } else {
            cfg.r_weight = 1e-3;
        }
        auto s = initial_ilc_state(n, cfg.kalman);
        s.d_hat = oracle::gaussian(rng, n, 1);
        EXPECT_LT((ilc_update(s, cfg, F) - closed_form(cfg, F, s.d_hat)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(IlcUpdate, BoxConstrainedMatchesProjectedGradient) {
    oracle::Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto F = random_lifted(rng, 3, 2, 5);
        IlcConfig cfg;
        cfg.r_weight = 0.05;
        cfg.constraints = input_box(10, 0.3);
        auto s = initial_ilc_state(10, cfg.kalman);
        s.d_hat = 3.0 * oracle::gaussian(rng, 10, 1);
        const MatrixXd H = 2.0 * (F.F.transpose() * F.F + cfg.r_weight * MatrixXd::Identity(10, 10));
        const VectorXd g = 2.0 * F.F.transpose() * s.d_hat;
        const VectorXd ref = oracle::box_qp(H, g, VectorXd::Constant(10, -0.3), VectorXd::Constant(10, 0.3));
        EXPECT_LT((ilc_update(s, cfg, F) - ref).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    }
}

TEST(IlcUpdate, ConstrainedSolutionIsFeasibleAndBeatsClipping) {
    oracle::Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto F = random_lifted(rng, 4, 2, 8);
        const auto n = F.size();
        IlcConfig cfg;
        cfg.r_weight = 1e-2;
        auto c = input_box(n, 0.2);
        c.S_c = MatrixXd::Identity(n, n);
        c.y_max = VectorXd::Constant(n, 5.0);
        cfg.constraints = c;
        auto s = initial_ilc_state(n, cfg.kalman);
        s.d_hat = oracle::gaussian(rng, n, 1);
        IlcOffsets off{VectorXd::Zero(n), VectorXd::Zero(n)};
        const VectorXd u = ilc_update(s, cfg, F, &off);
        EXPECT_LE((c.Z_c * u - c.u_max).maxCoeff(), 1e-8);
        EXPECT_LE((c.S_c * (F.F * u + s.d_hat) - c.y_max).maxCoeff(), 1e-8);
        auto cost = [&](const VectorXd& v) {
            const VectorXd e = F.F * v + s.d_hat;
            return e.squaredNorm() + cfg.r_weight * v.squaredNorm();
        };
        IlcConfig free = cfg;
        free.constraints.reset();
        const VectorXd clipped = ilc_update(s, free, F).cwiseMax(-0.2).cwiseMin(0.2);
        if ((F.F * clipped + s.d_hat).cwiseAbs().maxCoeff() <= 5.0) {
            EXPECT_LE(cost(u), cost(clipped) + 1e-12);
        }
    }
}

TEST(IlcUpdate, InfeasibleConstraintsAreReported) {
    oracle::Rng rng(11);
    const auto F = random_lifted(rng, 2, 1, 4);
    IlcConfig cfg;
    IlcConstraints c;
    c.Z_c.resize(2, 4);
    c.Z_c.setZero();
    c.Z_c(0, 0) = 1.0;
    c.Z_c(1, 0) = -1.0;
    c.u_max.resize(2);
    c.u_max << -1.0, -1.0;
    c.absolute = false;
    cfg.constraints = c;
    auto s = initial_ilc_state(4, cfg.kalman);
    s.d_hat.setOnes();
    EXPECT_THROW(ilc_update(s, cfg, F), InfeasibleProblem);
}

TEST(InitFromTransfer, ZeroInputGivesZeroEstimate) {
    oracle::Rng rng(12);
    const auto F = random_lifted(rng, 3, 2, 6);
    EXPECT_EQ(init_from_transfer(VectorXd::Zero(12), F).d_hat.cwiseAbs().maxCoeff(), 0.0);
}

TEST(InitFromTransfer, PredictsZeroErrorUnderTransferredInput) {
    oracle::Rng rng(13);
    const auto F = random_lifted(rng, 3, 2, 6);
    const VectorXd u = oracle::gaussian(rng, 12, 1);
    const auto s = init_from_transfer(u, F, {2.0, 0.0, 1.0});
    EXPECT_EQ((F.F * u + s.d_hat).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.j, 0);
    EXPECT_DOUBLE_EQ(s.P.variance(), 2.0);
}

TEST(InitFromTransfer, UpdateReproducesTransferredInput) {
    oracle::Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const auto F = invertible_lifted(rng, 4, 2, 6);
        const VectorXd u = oracle::gaussian(rng, 12, 1);
        IlcConfig cfg;
        cfg.r_weight = 1e-14;
        EXPECT_LT((ilc_update(init_from_transfer(u, F), cfg, F) - u).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(RunIlc, ExactModelConvergesInTwoIterations) {
    oracle::Rng rng(15);
    const auto F = invertible_lifted(rng, 4, 2, 20);
    const VectorXd d = oracle::gaussian(rng, 40, 1);
    IlcConfig cfg;
    cfg.r_weight = 1e-14;
    cfg.kalman = {1e6, 0.0, 1e-9};
    const IlcUpdater up(F, cfg);
    const RolloutFn plant = [&](int, const VectorXd& u) {
        const VectorXd y = F.F * u + d;
        return RolloutOutcome{y, lifted_tracking_error(y, 2)};
    };
    const auto rec = run_ilc(plant, up, 3);
    ASSERT_TRUE(rec.ok());
    ASSERT_EQ(rec.iterations.size(), 3u);
    EXPECT_LT(rec.iterations[1].error, 1e-6 * rec.iterations[0].error);
}

TEST(RunIlc, ErrorIsNonIncreasingAfterFirstTrial) {
    oracle::Rng rng(16);
    const auto F = invertible_lifted(rng, 5, 3, 15);
    const VectorXd d = oracle::gaussian(rng, 45, 1);
    const IlcUpdater up(F, IlcConfig{});
    const RolloutFn plant = [&](int, const VectorXd& u) {
        const VectorXd y = F.F * u + d;
        return RolloutOutcome{y, lifted_tracking_error(y, 3)};
    };
    const auto rec = run_ilc(plant, up, 12);
    for (std::size_t j = 2; j < rec.iterations.size(); ++j)
        EXPECT_LE(rec.iterations[j].error, rec.iterations[j - 1].error * (1.0 + 1e-12)) << j;
}

TEST(RunIlc, WarmStartFromGoodInputBeatsColdStart) {
    oracle::Rng rng(17);
    const auto F = invertible_lifted(rng, 4, 2, 20);
    const VectorXd d = oracle::gaussian(rng, 40, 1);
    const IlcUpdater up(F, IlcConfig{});
    const RolloutFn plant = [&](int, const VectorXd& u) {
        const VectorXd y = F.F * u + d;
        return RolloutOutcome{y, lifted_tracking_error(y, 2)};
    };
    const VectorXd perfect = F.F.partialPivLu().solve(-d);
    const auto cold = run_ilc(plant, up, 1);
    const auto warm = run_ilc(plant, up, 1, init_from_transfer(perfect, F));
    EXPECT_LT(warm.iterations[0].error, cold.iterations[0].error);
}

TEST(RunIlc, ZeroIterationsNeverTouchesPlant) {
    oracle::Rng rng(18);
    const IlcUpdater up(random_lifted(rng, 2, 1, 5), IlcConfig{});
    bool called = false;
    const RolloutFn plant = [&](int, const VectorXd& u) {
        called = true;
        return RolloutOutcome{u, 0.0};
    };
    const auto rec = run_ilc(plant, up, 0);
    EXPECT_TRUE(rec.iterations.empty());
    EXPECT_TRUE(rec.ok());
    EXPECT_FALSE(called);
}

TEST(RunIlc, FaultKeepsCompletedTrials) {
    oracle::Rng rng(19);
    const auto F = random_lifted(rng, 2, 1, 5);
    const IlcUpdater up(F, IlcConfig{});
    const RolloutFn plant = [&](int it, const VectorXd& u) {
        if (it == 3) throw RolloutDiverged("blew up", 7);
        return RolloutOutcome{F.F * u + VectorXd::Ones(5), 1.0};
    };
    const auto rec = run_ilc(plant, up, 5);
    EXPECT_FALSE(rec.ok());
    EXPECT_EQ(rec.iterations.size(), 2u);
    EXPECT_NE(rec.failure->find("iteration 3"), std::string::npos);
}

TEST(LiftedTrackingError, MeanEuclideanNorm) {
    VectorXd e(6);
    e << 3, 4, 0, 0, 0, 1;
    EXPECT_DOUBLE_EQ(lifted_tracking_error(e, 2), 2.0);
    EXPECT_THROW(lifted_tracking_error(e, 4), DimensionError);
}
