#include <toxedge/toxedge.hpp>

#include <benchmark/benchmark.h>

using namespace toxedge;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
    Tensor t(std::move(shape));
    for (float& v : t.values()) v = static_cast<float>(rng.normal(0.0, 1.0));
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Tensor a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv1d(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Tensor x = random_tensor(rng, {c, 1600}), w = random_tensor(rng, {c, c, 3}), bias = random_tensor(rng, {c});
    for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, bias, 2));
}
BENCHMARK(BM_Conv1d)->Arg(32)->Arg(64);

// f32 linear against its int8 counterpart on the same layer.
void BM_Linear(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const Tensor x = random_tensor(rng, {50, d}), w = random_tensor(rng, {d, d}), bias = random_tensor(rng, {d});
    for (auto _ : state) benchmark::DoNotOptimize(linear(x, w, bias));
}
BENCHMARK(BM_Linear)->Arg(64)->Arg(256);

void BM_QuantizedLinear(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const Tensor x = random_tensor(rng, {50, d}), w = random_tensor(rng, {d, d}), bias = random_tensor(rng, {d});
    const QTensor q = quantize_tensor(w);
    for (auto _ : state) benchmark::DoNotOptimize(quantized_linear(x, q, bias));
}
BENCHMARK(BM_QuantizedLinear)->Arg(64)->Arg(256);

void BM_CtcLoss(benchmark::State& state) {
    const auto t = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    DMatrix logits(t, 8);
    for (double& v : logits.data) v = rng.normal(0.0, 1.5);
    const DMatrix lp = log_softmax_rows(logits);
    CtcTarget target;
    for (std::size_t i = 0; i < t / 4; ++i) target.tokens.push_back(1 + static_cast<int>(i % 7));
    for (auto _ : state) benchmark::DoNotOptimize(ctc_loss_and_grad(lp, target));
}
BENCHMARK(BM_CtcLoss)->Arg(50)->Arg(200);

void BM_TinyForward(benchmark::State& state) {
    const Checkpoint f32 = init_checkpoint(ModelConfig::tiny(), 7);
    const Checkpoint ckpt = state.range(0) ? quantize_model(f32) : f32;
    const Waveform x = normalize(synth_dataset(5, 2, 1.0, ModelConfig::tiny())[0].waveform);
    for (auto _ : state) benchmark::DoNotOptimize(forward(x, ckpt));
    state.SetLabel(state.range(0) ? "int8" : "f32");
}
BENCHMARK(BM_TinyForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
