#include <benchmark/benchmark.h>

#include "dclnas/cluster.hpp"
#include "dclnas/evo.hpp"
#include "dclnas/nn.hpp"
#include "dclnas/paths.hpp"

using namespace dclnas;

namespace {

struct Nb201 {
    SearchSpace space = nasbench201_space();
    PathTable table = PathTable::build(space);
};

const Nb201& nb201() {
    static const Nb201 w;
    return w;
}

std::vector<Architecture> sample(const SearchSpace& s, int n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<Architecture> out;
    for (int i = 0; i < n; ++i) out.push_back(random_architecture(s, rng));
    return out;
}

void BM_EncodeArchitecture(benchmark::State& state) {
    const auto& w = nb201();
    const auto archs = sample(w.space, 256, 1);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_architecture(archs[i++ % archs.size()], w.space, w.table));
    }
}
BENCHMARK(BM_EncodeArchitecture);

void BM_KMedoids(benchmark::State& state) {
    const auto& w = nb201();
    std::vector<HardEncoding> enc;
    for (const auto& a : sample(w.space, static_cast<int>(state.range(0)), 2))
        enc.push_back(encode_architecture(a, w.space, w.table));
    for (auto _ : state) benchmark::DoNotOptimize(k_medoids(enc, static_cast<int>(state.range(1)), 3));
}
BENCHMARK(BM_KMedoids)->Args({64, 4})->Args({256, 8})->Args({256, 32});

void BM_ForwardBackward(benchmark::State& state) {
    const auto& w = nb201();
    const PredictorModel model(default_dims(w.space, w.table), 4);
    std::vector<EncodedArch> batch;
    for (const auto& a : sample(w.space, static_cast<int>(state.range(0)), 5))
        batch.push_back(prepare(a, w.space, w.table));
    for (auto _ : state) {
        const auto pass = forward(model, batch);
        auto grads = model.zero_grads();
        pass.backward_scores(ad::Mat::Ones(pass.scores().rows(), 1), grads);
        benchmark::DoNotOptimize(grads);
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128);

void BM_ScoreBatch(benchmark::State& state) {
    const auto& w = nb201();
    const PredictorModel model(default_dims(w.space, w.table), 4);
    std::vector<EncodedArch> batch;
    for (const auto& a : sample(w.space, 1024, 6)) batch.push_back(prepare(a, w.space, w.table));
    for (auto _ : state) benchmark::DoNotOptimize(score_batch(model, batch));
}
BENCHMARK(BM_ScoreBatch);

void BM_Offspring(benchmark::State& state) {
    const auto& w = nb201();
    const auto parents = sample(w.space, 20, 7);
    const EvoConfig cfg;
    Rng rng = make_rng(8);
    for (auto _ : state) {
        const auto& a = parents[uniform_index(rng, parents.size())];
        const auto& b = parents[uniform_index(rng, parents.size())];
        benchmark::DoNotOptimize(crossover(w.space, a, b, cfg, rng));
    }
}
BENCHMARK(BM_Offspring);

}  // namespace

BENCHMARK_MAIN();
