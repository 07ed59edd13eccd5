#include <benchmark/benchmark.h>

#include "afirl/advisor.hpp"
#include "afirl/affordance.hpp"
#include "afirl/experiment.hpp"
#include "afirl/fusion.hpp"
#include "afirl/learner.hpp"
#include "afirl/scenario.hpp"

using namespace afirl;

namespace {

const ExperimentContext& context() {
  static const auto ctx = [] {
    auto c = std::make_unique<ExperimentContext>();
    c->setFailurePredictor(std::make_shared<TransitionFailureOracle>());
    return c;
  }();
  return *ctx;
}

void BM_Enumerate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(StateSpace().size());
}
BENCHMARK(BM_Enumerate);

void BM_Dataset(benchmark::State& state) {
  const StateSpace space;
  for (auto _ : state) benchmark::DoNotOptimize(generateDataset(space));
}
BENCHMARK(BM_Dataset);

void BM_Jacobian(benchmark::State& state) {
  const auto data = generateDataset(StateSpace());
  const auto net = AffordanceNet::randomInit(1);
  for (auto _ : state) benchmark::DoNotOptimize(jacobian(net, data));
}
BENCHMARK(BM_Jacobian)->Unit(benchmark::kMillisecond);

void BM_NormalEquations(benchmark::State& state) {
  const auto data = generateDataset(StateSpace());
  const auto net = AffordanceNet::randomInit(1);
  for (auto _ : state) benchmark::DoNotOptimize(normalEquations(net, data));
}
BENCHMARK(BM_NormalEquations)->Unit(benchmark::kMillisecond);

void BM_Train(benchmark::State& state) {
  const auto data = generateDataset(StateSpace());
  TrainOptions options;
  options.epochs = static_cast<int>(state.range(0));
  options.minGradient = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, options));
}
BENCHMARK(BM_Train)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_RecognizeSpeech(benchmark::State& state) {
  const auto lexicon = CommandLexicon::defaults();
  const std::vector<std::string> hypotheses(static_cast<std::size_t>(state.range(0)), "go lqft");
  for (auto _ : state) benchmark::DoNotOptimize(recognizeSpeech(hypotheses, lexicon));
}
BENCHMARK(BM_RecognizeSpeech)->Arg(1)->Arg(10);

void BM_EmitAdvice(benchmark::State& state) {
  const auto& ctx = context();
  const Advisor advisor(ctx.space(), ctx.solution(), ctx.lexicon());
  const auto s = initialState(Location::Left);
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(advisor.emitAdvice(s, rng));
}
BENCHMARK(BM_EmitAdvice);

void BM_Episode(benchmark::State& state) {
  const auto& ctx = context();
  const Advisor advisor(ctx.space(), ctx.solution(), ctx.lexicon());
  LearnerConfig cfg;
  cfg.useFeedback = state.range(0) != 0;
  cfg.useAffordances = true;
  QTable q(ctx.space());
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(runEpisode(q, cfg, &advisor, ctx.predictor(), rng, false));
}
BENCHMARK(BM_Episode)->ArgName("feedback")->Arg(0)->Arg(1);

void BM_Condition(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.condition = Condition::IRLAff;
  cfg.agents = 10;
  cfg.episodes = 500;
  cfg.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(runCondition(cfg, context()));
}
BENCHMARK(BM_Condition)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
