// Serial reference against the OpenMP kernels.

#include "hqsat/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace hqsat;

namespace {

struct Data {
    GmmModel model;
    Matrix x;
    Matrix gamma;
    AeParams ae;
    Matrix codes, duals;

    explicit Data(Eigen::Index n) {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g;
        model.dim = 3;
        for (int r = 0; r < 7; ++r)
            model.components.push_back({1.0 / 7.0, Vector::Constant(3, r), Matrix::Identity(3, 3)});
        x = Matrix::NullaryExpr(n, 3, [&](Eigen::Index, Eigen::Index) { return 3.0 + 2.0 * g(rng); });
        gamma = kernels::par::e_step(PreparedMixture(model), x).gamma;
        ae = init_autoencoder({3, 16, 8, 3, 8, 16, 3}, Activation::tanh, 2);
        codes = x;
        duals = Matrix::Zero(n, 3);
    }
};

const Data& data() {
    static const Data d(50'000);
    return d;
}

template <bool Par>
void BM_EStep(benchmark::State& st) {
    const PreparedMixture mix(data().model);
    for (auto _ : st) benchmark::DoNotOptimize(Par ? kernels::par::e_step(mix, data().x) : kernels::ref::e_step(mix, data().x));
}

template <bool Par>
void BM_LogPdfRows(benchmark::State& st) {
    const PreparedMixture mix(data().model);
    for (auto _ : st)
        benchmark::DoNotOptimize(Par ? kernels::par::log_pdf_rows(mix, data().x) : kernels::ref::log_pdf_rows(mix, data().x));
}

template <bool Par>
void BM_AutoencoderGrad(benchmark::State& st) {
    for (auto _ : st)
        benchmark::DoNotOptimize(Par ? kernels::par::autoencoder_grad(data().ae, data().x)
                                     : kernels::ref::autoencoder_grad(data().ae, data().x));
}

template <bool Par>
void BM_LatentSolve(benchmark::State& st) {
    const PreparedMixture mix(data().model);
    kernels::LatentSolveInput in;
    in.gamma = &data().gamma;
    in.encoded = &data().codes;
    in.duals = &data().duals;
    for (std::size_t r = 0; r < mix.size(); ++r) {
        in.precisions.push_back(mix.precision(r));
        in.means.push_back(mix.mean(r));
    }
    in.lambda_tilde = 0.1;
    in.rho_tilde = 1.0;
    for (auto _ : st) benchmark::DoNotOptimize(Par ? kernels::par::latent_solve(in) : kernels::ref::latent_solve(in));
}

}  // namespace

BENCHMARK(BM_EStep<false>)->Name("e_step/ref")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStep<true>)->Name("e_step/par")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LogPdfRows<false>)->Name("log_pdf_rows/ref")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LogPdfRows<true>)->Name("log_pdf_rows/par")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AutoencoderGrad<false>)->Name("autoencoder_grad/ref")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AutoencoderGrad<true>)->Name("autoencoder_grad/par")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LatentSolve<false>)->Name("latent_solve/ref")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LatentSolve<true>)->Name("latent_solve/par")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
