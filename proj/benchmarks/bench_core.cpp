#include <benchmark/benchmark.h>

#include "xfer/ilc.hpp"
#include "xfer/l1_adaptive.hpp"
#include "xfer/plant.hpp"
#include "xfer/qp.hpp"
#include "xfer/rollout.hpp"
#include "xfer/trajectory.hpp"
#include "xfer/transfer.hpp"

using namespace xfer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

StateSpaceModel reference() {
    const auto l1 = L1Config::defaults(3);
    return discretize_reference(l1.kp, l1.m, 0.01);
}

// Trajectory of `steps` samples at 0.01 s.
Trajectory trajectory(int steps) { return trajectory_library("lemniscate", 0.01 * steps, 0.01); }

}  // namespace

static void BM_L1Step(benchmark::State& state) {
    const auto cfg = L1Config::defaults(3);
    auto s = L1State::zero(3);
    const VectorXd u = VectorXd::Constant(3, 0.5), v = VectorXd::Constant(3, 0.1), p = VectorXd::Zero(3);
    for (auto _ : state) {
        auto r = l1_step(s, cfg, u, v, p);
        s = r.state;
        benchmark::DoNotOptimize(s.sigma_hat.data());
    }
}
BENCHMARK(BM_L1Step);

static void BM_Rollout(benchmark::State& state) {
    const auto t = trajectory(static_cast<int>(state.range(0)));
    const auto D = reference();
    const auto l1 = L1Config::defaults(3);
    const auto plant = PlantModel::target_like();
    for (auto _ : state) benchmark::DoNotOptimize(rollout(plant, l1, D, t.nominal_input(), t.samples, 1).error);
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Rollout)->Arg(150)->Arg(300)->Arg(600)->Complexity();

static void BM_IlcUpdaterSetup(benchmark::State& state) {
    const auto F = lifted_representation(reference(), static_cast<int>(state.range(0)));
    for (auto _ : state) {
        IlcUpdater up(F, IlcConfig{});
        benchmark::DoNotOptimize(&up);
    }
}
BENCHMARK(BM_IlcUpdaterSetup)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_IlcNextInput(benchmark::State& state) {
    const int N = static_cast<int>(state.range(0));
    const IlcUpdater up(lifted_representation(reference(), N), IlcConfig{});
    auto s = initial_ilc_state(3 * N, KalmanConfig{});
    s.d_hat = VectorXd::LinSpaced(3 * N, -1.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(up.next_input(s).u.data());
}
BENCHMARK(BM_IlcNextInput)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMicrosecond);

static void BM_BoxQp(benchmark::State& state) {
    const auto n = state.range(0);
    const MatrixXd G = MatrixXd::Random(n, n);
    const MatrixXd H = G.transpose() * G + MatrixXd::Identity(n, n);
    const VectorXd g = 10.0 * VectorXd::Random(n);
    MatrixXd A(2 * n, n);
    A << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    const VectorXd b = VectorXd::Constant(2 * n, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(solve_qp(H, g, A, b).x.data());
}
BENCHMARK(BM_BoxQp)->Arg(20)->Arg(60)->Arg(120)->Unit(benchmark::kMicrosecond);

static void BM_TransferFitAndApply(benchmark::State& state) {
    const auto D = reference();
    const auto vrd = vector_relative_degree(D);
    const auto src = trajectory(600);
    const auto dst = trajectory_library("circle", 6.0, 0.01);
    const Signal ys = hold_extend(src.samples, vrd.max() - 1);
    const auto pt = perfect_tracking_input(D, vrd, ys);
    FitOptions fo;
    fo.structure = FitStructure::decoupled;
    fo.state_channels = state_channel_partition(D);
    const Signal yd = hold_extend(dst.samples, vrd.max());
    const MatrixXd x_dst = perfect_tracking_input(D, vrd, yd).x;
    for (auto _ : state) {
        const auto map = fit_transfer_map(build_window_state(pt.x, ys, vrd), pt.u, TransferVariant::state, vrd, 0, fo);
        RecordedFeedback fb(x_dst, Signal());
        benchmark::DoNotOptimize(apply_transfer_map_online(map, yd, fb, 600).data());
    }
}
BENCHMARK(BM_TransferFitAndApply)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
